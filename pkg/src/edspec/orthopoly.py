"""Orthogonal polynomials for the weights ``x**nu * exp(-x**2)``.

Polynomials are carried in product form ``p_j(x) = prod_k (x - x_k)``; the
zeros come from the Jacobi matrix of the coefficients computed so far, and the
inner products of the Stieltjes procedure use a composite rule whose panels
end at those zeros.  Norms ``c_j`` are stored with an extended exponent since
they overflow doubles after a few hundred degrees on the half-line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigvalsh_tridiagonal

from . import kernels
from .quadrature import product_roots, roots_rule
from .scaled import ScaledValue, collapse, log2_abs, scaled_sum
from .weight import SQRT_PI, Parity, WeightSpec

FORMAT = "edspec.recurrence"
FORMAT_VERSION = 1


class RecurrenceError(ArithmeticError):
    """The Stieltjes procedure produced an invalid coefficient."""


@dataclass(frozen=True, eq=False)
class RecurrenceTable:
    """Coefficients and zeros of ``p_0 .. p_{n_max-1}``.

    ``a[j]`` and ``b[j]`` are the recurrence coefficients (``b[0]`` holds
    ``c_0``, the total mass).  ``c_mant * 2**c_exp`` are the squared norms.
    ``roots[j]`` lists the zeros of ``p_j`` for ``j = 0 .. n_max``; for the
    even class these are the positive zeros in ``x``.
    """

    spec: WeightSpec
    a: np.ndarray
    b: np.ndarray
    c_mant: np.ndarray
    c_exp: np.ndarray
    roots: list = field(repr=False)

    @property
    def n_max(self) -> int:
        return self.a.shape[0]

    def c(self, j: int) -> ScaledValue:
        return ScaledValue(float(self.c_mant[j]), int(self.c_exp[j]))

    def log2_c(self):
        return log2_abs(self.c_mant, self.c_exp)

    def truncate(self, n: int) -> "RecurrenceTable":
        """The nested table for ``p_0 .. p_{n-1}``."""
        if not 1 <= n <= self.n_max:
            raise ValueError(f"cannot truncate a table of size {self.n_max} to {n}")
        return RecurrenceTable(self.spec, self.a[:n].copy(), self.b[:n].copy(),
                               self.c_mant[:n].copy(), self.c_exp[:n].copy(),
                               self.roots[:n + 1])

    def to_json(self) -> str:
        return json.dumps({
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "log2_c": [[float(m), int(e)] for m, e in zip(self.c_mant, self.c_exp)],
            "roots": [np.asarray(r).tolist() for r in self.roots],
        })

    @classmethod
    def from_json(cls, text: str) -> "RecurrenceTable":
        d = json.loads(text)
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a version-1 recurrence table")
        c = np.array(d["log2_c"], dtype=float).reshape(-1, 2)
        return cls(WeightSpec.from_dict(d["spec"]), np.array(d["a"]), np.array(d["b"]),
                   c[:, 0].copy(), c[:, 1].astype(np.int64),
                   [np.array(r, dtype=float) for r in d["roots"]])


def jacobi_roots(a, b, j: int, even: bool = False) -> np.ndarray:
    """Zeros of ``p_j`` from the leading ``j x j`` Jacobi matrix.

    ``b`` uses the table convention (``b[1:]`` are the ratios).  For the even
    class the eigenvalues are zeros in ``t = x**2`` and the positive square
    roots are returned.
    """
    if j == 0:
        return np.empty(0)
    if j == 1:
        t = np.array([float(a[0])])
    else:
        off = np.asarray(b[1:j], dtype=float)
        if np.any(off <= 0.0):
            raise RecurrenceError("non-positive recurrence ratio")
        try:
            t = eigvalsh_tridiagonal(np.asarray(a[:j], dtype=float), np.sqrt(off),
                                  lapack_driver="sterf")
        except LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise RecurrenceError(f"tridiagonal eigensolver failed at j={j}") from exc
    if even:
        if t[0] <= 0.0:
            raise RecurrenceError("even-class zero in t = x**2 is not positive")
        return np.sqrt(t)
    return t


def build_recurrence(spec: WeightSpec, n: int, panel_order: int = 20,
                     tail_panels: int | None = None) -> RecurrenceTable:
    """Run the discretised Stieltjes procedure for ``n`` polynomials."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if panel_order < 8:
        raise ValueError("panel_order must be >= 8")
    if tail_panels is not None and tail_panels < 1:
        raise ValueError("tail_panels must be >= 1")
    a = np.zeros(n)
    b = np.zeros(n)
    c_mant = np.zeros(n)
    c_exp = np.zeros(n, dtype=np.int64)
    roots = []
    prev_c = None
    for j in range(n):
        rj = jacobi_roots(a, b, j, spec.even)
        if spec.x_max is not None and rj.size and rj[-1] >= spec.x_max:
            raise RecurrenceError(f"zero of p_{j} outside the truncated domain")
        roots.append(rj)
        rule = roots_rule(spec, rj, panel_order, tail_panels)
        x = rule.nodes
        mant, expo = kernels.root_product(x, product_roots(rj, spec.even))
        # p_j(x)^2 rho(x) mu as (mant^2) * 2**scale
        with np.errstate(divide="ignore"):
            scale = 2.0 * expo + spec.log2_rho(x) + np.log2(rule.weights)
        m2 = mant * mant
        cj = scaled_sum(m2, scale)
        if not cj.significand > 0.0:
            raise RecurrenceError(f"non-positive norm c_{j}: quadrature failure")
        moment = scaled_sum(m2 * (x * x if spec.even else x), scale)
        a[j] = (moment / cj).to_float()
        if prev_c is None:
            b[j] = cj.to_float()
        else:
            b[j] = (cj / prev_c).to_float()
        if not (math.isfinite(a[j]) and b[j] > 0.0 and math.isfinite(b[j])):
            raise RecurrenceError(f"invalid coefficients at j={j}")
        c_mant[j], c_exp[j] = cj.significand, cj.exponent
        prev_c = cj
    roots.append(jacobi_roots(a, b, n, spec.even))
    return RecurrenceTable(spec, a, b, c_mant, c_exp, roots)


def even_recurrence_closed_form(n: int) -> RecurrenceTable:
    """Exact table for ``nu = 2`` even polynomials on the half-line.

    ``a_j = 2j + 3/2``, ``b_j = j (j + 1/2)`` and
    ``c_j = sqrt(pi) (2j+1)! / 2**(2j+2)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    j = np.arange(n, dtype=float)
    a = 2.0 * j + 1.5
    b = j * (j + 0.5)
    c0 = ScaledValue(SQRT_PI / 4.0)
    b[0] = c0.to_float()
    c_mant = np.zeros(n)
    c_exp = np.zeros(n, dtype=np.int64)
    c = c0
    for k in range(n):
        if k:
            c = c * ScaledValue(k * (k + 0.5))
        c_mant[k], c_exp[k] = c.significand, c.exponent
    roots = [jacobi_roots(a, b, k, even=True) for k in range(n + 1)]
    return RecurrenceTable(WeightSpec(2, None, Parity.EVEN), a, b, c_mant, c_exp, roots)


def poly_roots(table: RecurrenceTable, j: int) -> np.ndarray:
    if not 0 <= j <= table.n_max:
        raise ValueError(f"degree {j} outside 0..{table.n_max}")
    return np.asarray(table.roots[j]).copy()


def eval_poly(table: RecurrenceTable, j: int, x: float) -> ScaledValue:
    """Monic ``p_j(x)`` from the product form, as a :class:`ScaledValue`."""
    mant, expo = kernels.root_product(np.array([float(x)]),
                                      product_roots(table.roots[j], table.spec.even))
    return ScaledValue(float(mant[0]), int(expo[0]))


def eval_poly_many(table: RecurrenceTable, j: int, x):
    """Vectorised :func:`eval_poly`; returns ``(mant, expo)`` arrays."""
    return kernels.root_product(np.ascontiguousarray(x, dtype=float),
                                product_roots(table.roots[j], table.spec.even))


def eval_basis(table: RecurrenceTable, j: int, x, form: str = "unit"):
    """``phi_j(x) = p_j(x)/sqrt(c_j)`` or, with ``form="weight"``,
    ``rho(x)**0.5 * phi_j(x)``.

    The weight factor is folded into the exponent before collapsing, so
    ``form="weight"`` stays finite far past the largest zero.
    """
    if j >= table.n_max:
        raise ValueError(f"c_{j} is not available (table has {table.n_max} entries)")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0.0):
        raise ValueError("basis functions are defined for x >= 0")
    mant, expo = eval_poly_many(table, j, xs)
    scale = expo - 0.5 * float(table.log2_c()[j])
    if form == "weight":
        scale = scale + 0.5 * table.spec.log2_rho(xs)
    elif form != "unit":
        raise ValueError(f"unknown form {form!r}")
    out = collapse(mant, scale)
    return float(out[0]) if scalar else out
