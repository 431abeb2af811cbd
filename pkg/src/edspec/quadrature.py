"""Gaussian quadrature rules.

Standalone rules come from the Golub-Welsch eigenproblem of the Jacobi
matrix.  Composite rules place one Gauss-Legendre panel between consecutive
zeros of ``p_j`` (starting from the origin) and finish with either the
truncation point or a geometric sequence of tail panels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .weight import WeightSpec

# ln(1e-320) expressed in base 2: integrand level at which the tail stops
TAIL_DROP_LOG2 = math.log2(1e-320)
TAIL_GROWTH = 1.5
MAX_TAIL_PANELS = 200
BOOTSTRAP_EDGE = 10.0


class NonFiniteIntegrandError(ArithmeticError):
    """An integrand returned inf or nan at a quadrature node."""


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    tag: str = ""
    edges: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def __len__(self):
        return self.nodes.shape[0]

    def to_json(self) -> str:
        return json.dumps({"tag": self.tag, "nodes": self.nodes.tolist(),
                           "weights": self.weights.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "QuadratureRule":
        d = json.loads(text)
        return cls(np.array(d["nodes"]), np.array(d["weights"]), d.get("tag", ""))


def golub_welsch(alpha, beta, mu0):
    """Nodes and weights from recurrence coefficients.

    ``alpha`` are the diagonal entries, ``beta`` the (positive) recurrence
    ratios ``b_1..b_{n-1}`` and ``mu0`` the total mass of the weight.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[0] == 1:
        return alpha.copy(), np.array([float(mu0)])
    x, v = eigh_tridiagonal(alpha, np.sqrt(np.asarray(beta, dtype=float)))
    return x, mu0 * v[0] ** 2


@lru_cache(maxsize=64)
def _legendre_unit(order):
    k = np.arange(1, order, dtype=float)
    x, wts = golub_welsch(np.zeros(order), k * k / (4.0 * k * k - 1.0), 2.0)
    # symmetrise to remove eigensolver roundoff
    x = 0.5 * (x - x[::-1])
    wts = 0.5 * (wts + wts[::-1])
    x.setflags(write=False)
    wts.setflags(write=False)
    return x, wts


def gauss_legendre(order: int, interval=(-1.0, 1.0)) -> QuadratureRule:
    if order < 1:
        raise ValueError("order must be >= 1")
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ValueError("interval must satisfy lo < hi")
    x, wts = _legendre_unit(order)
    half = 0.5 * (hi - lo)
    return QuadratureRule(lo + half * (x + 1.0), half * wts, f"legendre[{lo:g},{hi:g}]")


def gauss_laguerre(order: int) -> QuadratureRule:
    """Rule for ``int_0^inf f(t) exp(-t) dt``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    k = np.arange(order, dtype=float)
    x, wts = golub_welsch(2.0 * k + 1.0, k[1:] ** 2, 1.0)
    return QuadratureRule(x, wts, "laguerre")


def panel_rule(edges, order: int, tag: str = "") -> QuadratureRule:
    """Concatenate Gauss-Legendre panels between consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0.0):
        raise ValueError("panel edges must be strictly increasing")
    x, wts = _legendre_unit(order)
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    weights = half[:, None] * wts[None, :]
    return QuadratureRule(nodes.ravel(), weights.ravel(), tag, edges)


def product_roots(roots, even: bool):
    """Roots of ``p_j`` as a polynomial in x (mirrored for the even class)."""
    roots = np.asarray(roots, dtype=float)
    return np.concatenate([roots, -roots]) if even else roots


def log2_abs_poly(x, roots, even: bool):
    mant, expo = kernels.root_product(np.atleast_1d(np.asarray(x, dtype=float)),
                                      product_roots(roots, even))
    with np.errstate(divide="ignore"):
        return expo + np.log2(np.abs(mant))


def tail_edges(spec: WeightSpec, roots, start: float, first_width: float,
               ref_log2: float, tail_panels: int | None = None):
    """Right edges of the tail panels beyond ``start``.

    With ``tail_panels=None`` panels keep growing by ``TAIL_GROWTH`` until
    ``p_j(x)**2 rho(x)`` at a panel start falls ``1e-320`` below
    ``ref_log2``; otherwise exactly ``tail_panels`` panels are used.
    """
    count = MAX_TAIL_PANELS if tail_panels is None else tail_panels
    widths = float(first_width) * TAIL_GROWTH ** np.arange(count)
    edges = float(start) + np.cumsum(widths)
    if tail_panels is not None:
        return list(edges)
    # the first panel is always kept; later panels start at edges[k-1]
    level = 2.0 * log2_abs_poly(edges, roots, spec.even) + spec.log2_rho(edges)
    low = np.flatnonzero(level < ref_log2 + TAIL_DROP_LOG2)
    stop = int(low[0]) + 1 if low.size else count
    return list(edges[:stop])


def roots_rule(spec: WeightSpec, roots, order: int, tail_panels: int | None = None,
               tag: str = "") -> QuadratureRule:
    """Composite rule whose interior panel edges are ``0`` and ``roots``."""
    roots = np.asarray(roots, dtype=float)
    if roots.size == 0:
        # bootstrap for p_0: unit-width panels over [0, 10] or [0, x_max]
        hi = BOOTSTRAP_EDGE if spec.half_line else spec.x_max
        interior = list(np.linspace(0.0, hi, max(1, math.ceil(hi)) + 1))
    else:
        interior = [0.0, *roots]
    if not spec.half_line:
        if roots.size:
            # [x_j, x_max] is split into growing panels; one panel is too coarse
            # while the largest zero is still far from x_max
            first = roots[-1] - roots[-2] if roots.size > 1 else roots[-1]
            widths = first * TAIL_GROWTH ** np.arange(MAX_TAIL_PANELS)
            edges = roots[-1] + np.cumsum(widths)
            interior.extend(edges[edges < spec.x_max - 0.5 * first])
            interior.append(spec.x_max)
        return panel_rule(interior, order, tag)
    base = panel_rule(interior, order)
    if roots.size:
        level = 2.0 * log2_abs_poly(base.nodes, roots, spec.even) + spec.log2_rho(base.nodes)
        ref = float(np.max(level))
        first = roots[-1] - roots[-2] if roots.size > 1 else roots[-1]
        start = roots[-1]
    else:
        ref = float(np.max(spec.log2_rho(base.nodes)))
        first = 1.0
        start = interior[-1]
    tail = tail_edges(spec, roots, start, first, ref, tail_panels)
    return panel_rule(np.array(interior + tail), order, tag)


def composite_rule(table, j: int, panel_order: int = 20,
                   tail_panels: int | None = None) -> QuadratureRule:
    """Composite rule built on the zeros of ``p_j`` from ``table``."""
    roots = table.roots[j]
    return roots_rule(table.spec, roots, panel_order, tail_panels,
                      tag=f"composite[{table.spec.label()},j={j},q={panel_order}]")


def integrate(rule: QuadratureRule, f) -> float:
    vals = np.asarray(f(rule.nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = rule.nodes[~np.isfinite(vals)]
        raise NonFiniteIntegrandError(f"integrand not finite at x={bad[:5]}")
    return float(np.dot(vals, rule.weights))
