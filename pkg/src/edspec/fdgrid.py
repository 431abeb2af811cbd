"""Hybrid Legendre/Laguerre speed grid with a 3-point finite-difference
discretisation of ``u_t = (Psi w u_x)_x / w``.

The grid puts ``n - m`` Gauss-Legendre points on ``[0, 2.5]`` and ``m``
transformed Gauss-Laguerre points on ``(2.5, inf)``.  The operator is a
conservative flux difference, so it is tridiagonal, annihilates constants
and is similar to a symmetric matrix through a positive diagonal scaling.
Time evolution is exact through the eigendecomposition of that symmetric
form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .quadrature import gauss_laguerre, gauss_legendre
from .weight import psi as default_psi, w

SPLIT = 2.5


@dataclass(frozen=True)
class HybridGrid:
    """Nodes and plain ``dx`` integration weights of the hybrid grid.

    The tail weights make ``sum p(x_j^2) x_j exp(-x_j^2) w_j`` exact for
    ``int_{2.5}^inf p(x^2) x exp(-x^2) dx`` when ``deg p < 2m``.
    """

    n: int
    m: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def legendre_count(self) -> int:
        return self.n - self.m


def tail_count(n: int, rule: str = "third") -> int:
    """``floor(n/3)`` by default; ``rule="gs2"`` gives 1 for ``n <= 12`` else 2."""
    if rule == "third":
        return n // 3
    if rule == "gs2":
        return 1 if n <= 12 else 2
    raise ValueError(f"unknown tail rule {rule!r}")


def build_hybrid_grid(n: int, m: int | None = None, rule: str = "third") -> HybridGrid:
    if n < 4:
        raise ValueError("n must be >= 4")
    m = tail_count(n, rule) if m is None else int(m)
    if not 1 <= m < n:
        raise ValueError("need 1 <= m < n")
    leg = gauss_legendre(n - m, (0.0, SPLIT))
    lag = gauss_laguerre(m)
    s = lag.nodes
    x_tail = np.sqrt(SPLIT ** 2 + s)
    w_tail = lag.weights * np.exp(s) / (2.0 * x_tail)
    nodes = np.concatenate([leg.nodes, x_tail])
    weights = np.concatenate([leg.weights, w_tail])
    order = np.argsort(nodes, kind="stable")
    return HybridGrid(n, m, nodes[order], weights[order])


@dataclass(eq=False)
class TridiagonalOperator:
    """Discrete ``L`` acting on nodal values of ``u``.

    ``(L u)_i = sub[i-1] u_{i-1} + diag[i] u_i + sup[i] u_{i+1}``.  With
    ``D = diag(scale)``, ``D^{1/2} L D^{-1/2}`` is symmetric.
    """

    grid: HybridGrid
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    scale: np.ndarray
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.sub * u[:-1]
        out[:-1] += self.sup * u[1:]
        return out

    def symmetric(self):
        """Diagonal and off-diagonal of ``D^{1/2} L D^{-1/2}``."""
        r = np.sqrt(self.scale)
        return self.diag.copy(), self.sup * r[:-1] / r[1:]

    def eigen(self):
        """Eigenvalues and orthonormal eigenvectors of the symmetric form."""
        if self._eig is None:
            d, e = self.symmetric()
            try:
                lam, Q = eigh_tridiagonal(d, e)
            except LinAlgError as exc:  # pragma: no cover - LAPACK failure
                raise ArithmeticError("tridiagonal eigensolver failed") from exc
            self._eig = (lam, Q)
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigen()[0]


def assemble_fd(grid: HybridGrid, psi=default_psi) -> TridiagonalOperator:
    """Conservative midpoint-flux discretisation with zero flux at both ends.

    ``F_{i+1/2} = Psi w (x_{i+1/2}) (u_{i+1} - u_i)/(x_{i+1} - x_i)`` and
    ``(L u)_i = -(F_{i+1/2} - F_{i-1/2}) / (w(x_i) Delta_i)`` with control
    volumes ``Delta_i`` bounded by the midpoints (and by 0 on the left).
    """
    x = np.asarray(grid.nodes, dtype=float)
    if x.shape[0] < 3:
        raise ValueError("need at least 3 nodes")
    h = np.diff(x)
    if np.any(h <= 0.0):
        raise ValueError("grid nodes must be distinct and increasing")
    mid = 0.5 * (x[:-1] + x[1:])
    k = psi(mid) * w(mid) / h                      # flux conductances
    edges = np.concatenate([[0.0], mid, [x[-1] + 0.5 * h[-1]]])
    vol = w(x) * np.diff(edges)                    # w_i Delta_i
    diag = np.zeros_like(x)
    diag[:-1] += k
    diag[1:] += k
    diag /= vol
    sup = -k / vol[:-1]
    sub = -k / vol[1:]
    return TridiagonalOperator(grid, sub, diag, sup, vol)


def evolve_fd(op: TridiagonalOperator, u0, t: float) -> np.ndarray:
    """Nodal ``u(t) = exp(-L t) u0`` through the symmetric eigendecomposition."""
    if t < 0:
        raise ValueError("t must be non-negative")
    lam, Q = op.eigen()
    r = np.sqrt(op.scale)
    v = Q.T @ (r * np.asarray(u0, dtype=float))
    return (Q @ (np.exp(-np.maximum(lam, 0.0) * t) * v)) / r


def to_U(grid: HybridGrid, u) -> np.ndarray:
    """Distribution values ``U = u exp(-x^2)``."""
    return np.asarray(u, dtype=float) * np.exp(-grid.nodes ** 2)


def from_U(grid: HybridGrid, U) -> np.ndarray:
    return np.asarray(U, dtype=float) * np.exp(grid.nodes ** 2)


def grid_mass(grid: HybridGrid, u) -> float:
    """``sum U_i x_i^2 mu_i`` with ``U = u exp(-x^2)``."""
    return float(np.sum(to_U(grid, u) * grid.nodes ** 2 * grid.weights))


def fd_error_norms(u, reference, grid: HybridGrid):
    """H-norm error against ``reference(x)`` and the grid entropy.

    Returns ``(sqrt(sum (u_i - u_ref(x_i))^2 w(x_i) mu_i), -sum u_i^2 w(x_i) mu_i)``.
    """
    x, mu = grid.nodes, grid.weights
    u = np.asarray(u, dtype=float)
    diff = u - np.asarray(reference(x), dtype=float)
    wm = w(x) * mu
    return math.sqrt(float(np.sum(diff * diff * wm))), -float(np.sum(u * u * wm))
