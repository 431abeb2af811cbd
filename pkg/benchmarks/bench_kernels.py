"""Compiled vs pure-Python root-product kernels.

Times the two kernels directly on random nodes and roots, checks that both
backends agree, and times an end-to-end operator build under each backend
in a fresh interpreter (the backend is chosen at import).

    python benchmarks/bench_kernels.py [--sizes 200 1000 4000] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from edspec import _kernels_py

try:
    from edspec import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _log2_gap(ma, ea, mb, eb):
    """Largest difference of ``log2|m| + e`` where both values are nonzero
    (inf if a sign disagrees)."""
    nz = (ma != 0) & (mb != 0)
    if np.any(np.sign(ma[nz]) != np.sign(mb[nz])):
        return float("inf")
    la = np.log2(np.abs(ma[nz])) + ea[nz]
    lb = np.log2(np.abs(mb[nz])) + eb[nz]
    return float(np.max(np.abs(la - lb))) if la.size else 0.0


def kernel_rows(sizes, repeats, rng):
    rows = []
    for n in sizes:
        x = rng.uniform(0.0, 40.0, 20 * n)
        roots = np.sort(rng.uniform(0.0, 40.0, n))
        row = {"roots": n, "nodes": x.size}
        for name in ("root_product", "root_product_deriv"):
            ref = getattr(_kernels_py, name)(x, roots)
            row[f"{name}_python_ms"] = 1e3 * best_of(lambda: getattr(_kernels_py, name)(x, roots),
                                                     repeats)
            if _kernels is not None:
                got = getattr(_kernels, name)(x, roots)
                row[f"{name}_max_log2_diff"] = max(
                    _log2_gap(a, got[-1], b, ref[-1]) for a, b in zip(got[:-1], ref[:-1]))
                row[f"{name}_compiled_ms"] = 1e3 * best_of(
                    lambda: getattr(_kernels, name)(x, roots), repeats)
        rows.append(row)
    return rows


BUILD = ("import time; from edspec import galerkin, kernels; from edspec.weight import WeightSpec;"
         "t=time.perf_counter(); galerkin.build_operator(WeightSpec(2), {n});"
         "print(kernels.BACKEND, time.perf_counter()-t)")


def build_rows(n):
    rows = []
    for pure in ("0", "1"):
        env = dict(os.environ, EDSPEC_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", BUILD.format(n=n)], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        rows.append({"backend": out[0], "n": n, "build_s": float(out[1])})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 1000, 4000])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--build-n", type=int, default=200, help="operator size for the build timing")
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    doc = {"kernels": kernel_rows(args.sizes, args.repeats, rng),
           "build": build_rows(args.build_n)}
    for r in doc["kernels"]:
        line = f"roots={r['roots']:>5} nodes={r['nodes']:>6}"
        for name in ("root_product", "root_product_deriv"):
            py = r[f"{name}_python_ms"]
            line += f"  {name}: python {py:8.2f} ms"
            if f"{name}_compiled_ms" in r:
                c = r[f"{name}_compiled_ms"]
                line += f", compiled {c:8.2f} ms ({py / c:4.1f}x)"
        print(line)
    for r in doc["build"]:
        print(f"build_operator(n={r['n']}) with {r['backend']:>8} kernels: {r['build_s']:.2f} s")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)


if __name__ == "__main__":
    main()
