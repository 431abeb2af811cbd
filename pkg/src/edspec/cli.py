"""Command-line front end: each subcommand writes figure data as CSV/JSON.

Every file starts with a ``#``-prefixed JSON metadata line holding the
config hash, the floating point precision and the provenance of any
reference solution.  Output is byte-deterministic for a given config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__, eigenref, fdgrid, galerkin, initial, kernels
from .orthopoly import build_recurrence, even_recurrence_closed_form
from .reference import build_reference
from .weight import Parity, WeightSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("recurrence", "evolve", "compare", "eigfun", "bench")


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class WeightConfig(_Strict):
    nu: Literal[0, 2, 4] = 2
    x_max: float | None = Field(default=None, gt=0)
    parity: Literal["full", "even"] = "full"

    def spec(self) -> WeightSpec:
        return WeightSpec(self.nu, self.x_max, Parity(self.parity))


class TimeGrid(_Strict):
    kind: Literal["log", "linear", "list"] = "log"
    start: float = Field(default=1e-4, ge=0)
    stop: float = Field(default=1e3, ge=0)
    count: int = Field(default=90, ge=1)
    values: list[float] | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "list":
            if not self.values or any(v < 0 for v in self.values):
                raise ValueError("kind='list' needs non-negative values")
        elif self.kind == "log" and not 0 < self.start <= self.stop:
            raise ValueError("log grid needs 0 < start <= stop")
        elif self.kind == "linear" and not self.start <= self.stop:
            raise ValueError("linear grid needs start <= stop")
        return self

    def times(self) -> np.ndarray:
        if self.kind == "list":
            return np.array(self.values, dtype=float)
        if self.kind == "log":
            return np.logspace(math.log10(self.start), math.log10(self.stop), self.count)
        return np.linspace(self.start, self.stop, self.count)


class Tolerances(_Strict):
    ode: float = Field(default=1e-12, ge=1e-13)
    mode_floor: float = Field(default=0.0, ge=0)  # added to |alpha_j| for log plots
    mode_threshold: float = Field(default=1e-10, gt=0)


class RunConfig(_Strict):
    command: Literal["recurrence", "evolve", "compare", "eigfun", "bench"]
    weight: WeightConfig = WeightConfig()
    n: int = Field(default=64, ge=1, le=5000)
    example: Literal[1, 2, 15] | None = None
    initial: str | None = None
    times: TimeGrid = TimeGrid()
    x: list[float] | None = None
    x_points: int = Field(default=101, ge=2)
    closed_form: bool = False
    ns: list[int] = [8, 16, 32]
    n_ref: int = Field(default=400, ge=2)
    target: float = Field(default=1.0, ge=0)
    ode_x_max: float = Field(default=20.0, gt=0, le=30)
    fit_window: tuple[float, float] = (8.0, 14.0)
    residual_window: tuple[float, float] = (0.125, 6.0)
    repeats: int = Field(default=5, ge=1)
    out: str | None = None  # output directory; --out takes precedence
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="after")
    def _check(self):
        if self.example is not None and self.initial is not None:
            raise ValueError("give either 'example' or 'initial', not both")
        if self.weight.parity == "even" and self.weight.x_max is not None:
            raise ValueError("the even family is only defined on the half-line")
        if self.closed_form and (self.weight.nu, self.weight.parity, self.weight.x_max) != (2, "even", None):
            raise ValueError("closed_form applies only to the nu=2 even half-line family")
        if any(k < 2 for k in self.ns):
            raise ValueError("ns entries must be >= 2")
        return self

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def load_config(path: str | None, command: str) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.setdefault("command", command)
    if data["command"] != command:
        raise ConfigError(f"config is for {data['command']!r}, not {command!r}")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def initial_condition(cfg: RunConfig):
    if cfg.initial is not None:
        return expression_function(cfg.initial)
    return initial.EXAMPLES[cfg.example if cfg.example is not None else 1]


def expression_function(text: str):
    """Vectorised ``f(x)`` from a sympy expression in ``x``."""
    try:
        import sympy
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise ConfigError("initial-condition expressions need sympy") from exc
    x = sympy.Symbol("x", positive=True)
    try:
        expr = sympy.sympify(text, locals={"x": x})
    except (sympy.SympifyError, TypeError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse initial condition {text!r}") from exc
    if expr.free_symbols - {x}:
        raise ConfigError("initial condition may only depend on x")
    if expr.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
        raise ConfigError(f"initial condition {text!r} is not finite")
    fn = sympy.lambdify(x, expr, "numpy")
    return lambda xs: np.broadcast_to(np.asarray(fn(xs), dtype=float), np.shape(xs)).copy()


# -- output -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def metadata(cfg: RunConfig, **extra) -> dict:
    meta = {"command": cfg.command, "config_hash": cfg.digest(), "precision": "double",
            "edspec_version": __version__, "reference": None}
    meta.update(extra)
    return meta


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(meta: dict, columns, rows) -> str:
    lines = ["# " + json.dumps(meta, sort_keys=True), ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- commands ------------------------------------------------------------------

def _operator(cfg: RunConfig, spec: WeightSpec, n: int, threads: int):
    return galerkin.build_operator(spec, n, threads=threads)


def _x_samples(cfg: RunConfig, spec: WeightSpec) -> np.ndarray:
    if cfg.x is not None:
        return np.array(cfg.x, dtype=float)
    hi = spec.x_max if spec.x_max is not None else 6.0
    return np.linspace(0.0, hi, cfg.x_points)


def cmd_recurrence(cfg: RunConfig, out: str, threads: int) -> list[str]:
    spec = cfg.weight.spec()
    if cfg.closed_form:
        table = even_recurrence_closed_form(cfg.n)
    else:
        table = build_recurrence(spec, cfg.n)
    k = np.arange(cfg.n)
    report: dict = {"family": spec.label(), "closed_form": cfg.closed_form}
    tail = k >= max(1, cfg.n // 2)
    if spec.even:
        # b_k = k (k + 1/2): leading fit b_k / k^2
        report["fit"] = {"model": "b_k ~ A k^2 + B k",
                         "coef": np.polyfit(k[tail], table.b[tail], 2)[:2].tolist()}
    elif spec.half_line:
        kk = k[tail] + 1.0
        A = np.column_stack([kk, 1.0 / kk])
        coef = np.linalg.lstsq(A, table.b[tail], rcond=None)[0]
        report["fit"] = {"model": "b_k ~ A (k+1) + B/(k+1)", "A": float(coef[0]),
                         "B": float(coef[1]), "A_expected": 1.0 / 6.0}
    else:
        kk = k[tail].astype(float)
        A = np.column_stack([np.ones_like(kk), 1.0 / kk ** 2])
        coef = np.linalg.lstsq(A, table.b[tail], rcond=None)[0]
        report["fit"] = {"model": "b_k ~ L + C/k^2", "L": float(coef[0]), "C": float(coef[1]),
                         "mean_b_tail": float(np.mean(table.b[tail])),
                         "L_expected": spec.x_max ** 2 / 16.0}
    meta = metadata(cfg, asymptote=report)
    rows = [(int(j), table.a[j], table.b[j], float(table.log2_c()[j])) for j in k]
    table_path = os.path.join(out, "recurrence_table.json")
    csv_path = os.path.join(out, "recurrence.csv")
    write_atomic(table_path, table.to_json() + "\n")
    write_atomic(csv_path, csv_text(meta, ["k", "a_k", "b_k", "log2_c_k"], rows))
    return [table_path, csv_path]


def cmd_evolve(cfg: RunConfig, out: str, threads: int) -> list[str]:
    spec = cfg.weight.spec()
    op = _operator(cfg, spec, cfg.n, threads)
    f = initial_condition(cfg)
    alpha0 = galerkin.project_initial(f, op)
    times = cfg.times.times()
    xs = _x_samples(cfg, spec)
    ev_u = galerkin.PointEvaluator(op, xs)
    ev_s = galerkin.PointEvaluator(op, xs, "exphalf")
    rows, modes, active = [], [], []
    floor = cfg.tolerances.mode_floor
    lam = op.s ** 2
    for t in times:
        a = galerkin.evolve(op, alpha0, float(t))
        m, S = galerkin.mass(op, a), galerkin.entropy(op, a)
        for x, u, us in zip(xs, ev_u(a), ev_s(a)):
            rows.append((float(t), x, u, us, m, S))
        active.append(int(np.sum(np.abs(a) > cfg.tolerances.mode_threshold)))
        _, gamma = galerkin.eigenmode_amplitudes(op, alpha0, float(t), include_zero=True)
        for j in range(op.n):
            modes.append((float(t), j, abs(a[j]) + floor, lam[j], abs(gamma[j]) + floor))
    meta = metadata(cfg, family=spec.label(), n=op.n, mass0=galerkin.mass(op, alpha0))
    p1 = os.path.join(out, "evolution.csv")
    p2 = os.path.join(out, "modes.csv")
    write_atomic(p1, csv_text(meta, ["t", "x", "u", "u_scaled", "mass", "entropy"], rows))
    write_atomic(p2, csv_text(dict(meta, mode_floor=floor, active_modes=active,
                                   mode_threshold=cfg.tolerances.mode_threshold),
                              ["t", "j", "abs_alpha", "s2", "abs_gamma"], modes))
    return [p1, p2]


def _compare_cell(scheme: str, n: int, f, ref, times):
    rows = []
    if scheme == "gs2":
        grid = fdgrid.build_hybrid_grid(n)
        fop = fdgrid.assemble_fd(grid)
        u0 = np.asarray(f(grid.nodes), dtype=float)
        for t in times:
            ut = fdgrid.evolve_fd(fop, u0, float(t))
            err, S = fdgrid.fd_error_norms(ut, ref.u(float(t)), grid)
            rows.append((scheme, n, float(t), err, abs(S - ref.entropy(float(t)))))
        return rows
    spec = WeightSpec(2, None, Parity(scheme))
    op = galerkin.build_operator(spec, n)
    alpha0 = galerkin.project_initial(f, op)
    cmp = galerkin.HNormComparator(op, ref.op)
    for t in times:
        a = galerkin.evolve(op, alpha0, float(t))
        err = cmp(a, ref.alpha(float(t)))
        rows.append((scheme, n, float(t), err, abs(galerkin.entropy(op, a) - ref.entropy(float(t)))))
    return rows


def cmd_compare(cfg: RunConfig, out: str, threads: int) -> list[str]:
    f = initial_condition(cfg)
    ref = build_reference(f, cfg.n_ref, threads=threads)
    times = cfg.times.times()
    cells = [(s, n) for n in cfg.ns for s in ("full", "even", "gs2")]
    with ThreadPoolExecutor(max(1, threads)) as pool:
        results = list(pool.map(lambda c: _compare_cell(c[0], c[1], f, ref, times), cells))
    rows = [r for cell in results for r in cell]
    meta = metadata(cfg, reference=ref.provenance)
    path = os.path.join(out, "compare.csv")
    write_atomic(path, csv_text(meta, ["scheme", "n", "t", "h_error", "entropy_error"], rows))
    return [path]


def cmd_eigfun(cfg: RunConfig, out: str, threads: int) -> list[str]:
    spec = cfg.weight.spec()
    op = _operator(cfg, spec, cfg.n, threads)
    lam, fn = galerkin.eigenfunction_of_PL(op, cfg.target)
    hi = min(cfg.ode_x_max, spec.x_max) if spec.x_max is not None else cfg.ode_x_max
    if lam <= 0.0:
        raise ArithmeticError("selected the zero eigenvalue; choose target > 0")
    sol = eigenref.solve_ode(lam, hi, cfg.tolerances.ode)
    env = {}
    lo, top = cfg.fit_window
    if top <= hi:
        try:
            env = dict(zip(("A0", "theta0"), eigenref.fit_envelope(sol, lam, cfg.fit_window)))
        except eigenref.EnvelopeFitError as exc:
            env = {"fit_error": str(exc)}

    def u_p(xs):
        return fn(xs, "exphalf")
    report = eigenref.residual_diagnostic(u_p, sol, window=cfg.residual_window,
                                          x_range=(0.0, hi))
    gx, gr = eigenref.gibbs_overshoot(u_p, sol, report.scale)
    xs = np.linspace(0.0, hi, cfg.x_points)
    upx = report.scale * u_p(xs)
    urx = sol.scaled(xs)
    meta = metadata(cfg, family=spec.label(), n=op.n, eigenvalue=lam, index=fn.index,
                    scale=report.scale, envelope=env, tol=cfg.tolerances.ode,
                    reference="ODE solution of L u = lambda u (DOP853)",
                    gibbs={"x": gx, "r": gr},
                    max_abs_r_window=report.max_abs(*cfg.residual_window))
    p1 = os.path.join(out, "eigfun.csv")
    p2 = os.path.join(out, "residual_extrema.csv")
    p3 = os.path.join(out, "coefficients.csv")
    env_p = eigenref.envelope(lam, np.maximum(xs, 1.0))[0] * env.get("A0", math.nan)
    write_atomic(p1, csv_text(meta, ["x", "u_p_scaled", "u_scaled", "r", "envelope"],
                              zip(xs, upx, urx, upx - urx, env_p)))
    write_atomic(p2, csv_text(meta, ["x", "r"], report.extrema()))
    # expansion of u_p in the orthonormal polynomial basis: R1^{-1} V_j
    from scipy.linalg import solve_triangular
    coeffs = report.scale * solve_triangular(op.R1, fn.coefficients)
    write_atomic(p3, csv_text(meta, ["j", "alpha_j"], enumerate(coeffs)))
    return [p1, p2, p3]


def _time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench(cfg: RunConfig, out: str, threads: int) -> list[str]:
    """Phase A: factorisation/eigensolve.  Phase B: evolution to every time."""
    times = cfg.times.times()
    rows = []
    for n in cfg.ns:
        grid = fdgrid.build_hybrid_grid(n)
        fop = fdgrid.assemble_fd(grid)
        u0 = grid.nodes.copy()

        def phase_a_fd():
            fop._eig = None
            fop.eigen()
        a_fd = _time(phase_a_fd, cfg.repeats)
        b_fd = _time(lambda: [fdgrid.evolve_fd(fop, u0, float(t)) for t in times], cfg.repeats)
        op = galerkin.build_operator(WeightSpec(2), n)
        P = op.R()
        alpha0 = galerkin.project_initial(initial.example_1, op)
        a_op = _time(lambda: np.linalg.svd(P), cfg.repeats)
        b_op = _time(lambda: [galerkin.evolve(op, alpha0, float(t)) for t in times], cfg.repeats)
        rows.append({"n": n, "GS2": {"A_ms": 1e3 * a_fd, "B_ms": 1e3 * b_fd},
                     "OP": {"A_ms": 1e3 * a_op, "B_ms": 1e3 * b_op}})
    doc = {"meta": metadata(cfg, backend=kernels.BACKEND, times=len(times),
                            note="wall times are machine-local"), "rows": rows}
    path = os.path.join(out, "bench.json")
    write_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return [path]


HANDLERS = {"recurrence": cmd_recurrence, "evolve": cmd_evolve, "compare": cmd_compare,
            "eigfun": cmd_eigfun, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file matching RunConfig")
    common.add_argument("--out", default=None,
                        help="output directory (default: config 'out', else .)")
    common.add_argument("--precision", choices=["double"], default="double")
    common.add_argument("--seed", type=int, default=None, help="reserved; unused")
    common.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"recurrence": "build a recurrence table and report b_k asymptotics",
             "evolve": "evolve an initial condition and emit mode amplitudes",
             "compare": "error vs time for full, even and GS2 schemes",
             "eigfun": "compare an eigenfunction of PL with the ODE solution",
             "bench": "time the factorisation and evolution phases"}
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = args.out or cfg.out or "."
        paths = HANDLERS[args.command](cfg, out, args.threads)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
