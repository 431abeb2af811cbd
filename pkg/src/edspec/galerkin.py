"""Projected dynamics of ``u_t = -L u`` on a polynomial subspace.

With ``L u = -(Psi w u')'/w`` and ``w = x**2 exp(-x**2)``, the Galerkin
system ``M alpha' = -K alpha`` is never formed.  Instead the quadrature
matrices ``E1`` (values) and ``E2`` (derivatives) are QR factorised,
``M = R1^T R1``, ``K = R2^T R2``, and the pseudo-inverse ``pinv(R2 R1^{-1})``
(whose leading row and column vanish because ``phi_0`` is constant) is
diagonalised by an SVD.

All coefficient vectors are expressed in the basis ``Phi(x) R1^{-1}``, which
is orthonormal in ``L^2(w dx)`` whatever weight exponent built ``Phi``; in
that basis the exact evolution is ``V exp(-S^2 t) V^T alpha``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solve_triangular, svd

from . import kernels
from .orthopoly import FORMAT_VERSION, RecurrenceTable
from .quadrature import QuadratureRule, composite_rule, product_roots
from .scaled import collapse
from .weight import LOG2E, SQRT_PI, Parity, WeightSpec, log2_w, psi as default_psi

MOMENT_ORDERS = 7  # moments x^0 .. x^6 are tabulated at assembly


class DegenerateBasisError(ArithmeticError):
    """The stiffness factor is singular: the basis is not independent."""


# -- basis evaluation --------------------------------------------------------

def _columns(table: RecurrenceTable, n: int, x, log2_extra, deriv: bool, first: int = 0,
             threads: int = 1) -> np.ndarray:
    """``phi_j(x) * 2**log2_extra`` (or ``phi_j'``) for ``j = first .. n-1``.

    Every column is produced by an independent kernel call with a fixed
    reduction order, so the result does not depend on ``threads``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    log2_extra = np.broadcast_to(np.asarray(log2_extra, dtype=float), x.shape)
    half_log2_c = 0.5 * table.log2_c()
    even = table.spec.even
    out = np.empty((x.shape[0], n - first))

    def fill(j):
        r = product_roots(table.roots[j], even)
        if deriv:
            _, dmant, expo = kernels.root_product_deriv(x, r)
            mant = dmant
        else:
            mant, expo = kernels.root_product(x, r)
        out[:, j - first] = collapse(mant, expo - half_log2_c[j] + log2_extra)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(fill, range(first, n)))
    else:
        for j in range(first, n):
            fill(j)
    return out


def basis_values(table: RecurrenceTable, n: int, x, scaling: str | None = None) -> np.ndarray:
    """Matrix ``[phi_j(x_k) * s(x_k)]`` with ``s`` = 1, ``exp(-x^2/2)`` or ``exp(-x^2)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("evaluation points must be >= 0")
    if table.spec.x_max is not None and np.any(x > table.spec.x_max * (1 + 1e-14)):
        raise ValueError("evaluation points outside the truncated domain")
    if scaling in (None, "none"):
        extra = np.zeros_like(x)
    elif scaling == "exphalf":
        extra = -0.5 * x * x * LOG2E
    elif scaling == "weight":
        extra = -x * x * LOG2E
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    return _columns(table, n, x, extra, deriv=False)


# -- the operator -------------------------------------------------------------

@dataclass(eq=False)
class GalerkinOperator:
    """Factored projected evolution operator of dimension ``n``.

    ``s`` holds the singular values of ``R2 R1^{-1}`` in ascending order with
    ``s[0] = 0``; the eigenvalues of ``PL`` are ``s**2``.  ``moments[j, k]``
    is ``<x**k, psi_j>`` for the corrected basis ``psi = Phi R1^{-1}``.
    """

    table: RecurrenceTable
    rule: QuadratureRule
    R1: np.ndarray
    R2_tilde: np.ndarray
    V: np.ndarray
    s: np.ndarray
    U: np.ndarray
    moments: np.ndarray
    _E1: np.ndarray | None = field(default=None, repr=False)

    @property
    def spec(self) -> WeightSpec:
        return self.table.spec

    @property
    def n(self) -> int:
        return self.R1.shape[0]

    @property
    def S(self) -> np.ndarray:
        return np.diag(self.s)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.s ** 2

    @property
    def sqrt_wmu(self) -> np.ndarray:
        return np.exp2(0.5 * (log2_w(self.rule.nodes) + np.log2(self.rule.weights)))

    @property
    def E1(self) -> np.ndarray:
        """``sqrt(w mu) phi_j(x_k)`` at the assembly nodes (recomputed if dropped)."""
        if self._E1 is None:
            self._E1 = _columns(self.table, self.n, self.rule.nodes,
                                0.5 * (log2_w(self.rule.nodes) + np.log2(self.rule.weights)),
                                deriv=False)
        return self._E1

    def R(self) -> np.ndarray:
        """``R2 R1^{-1}`` assembled from the stored factors."""
        n = self.n
        R2 = np.zeros((n, n))
        R2[1:, 1:] = self.R2_tilde
        return solve_triangular(self.R1, R2.T, trans="T").T

    def to_json(self) -> str:
        def arr(a):
            return {"shape": list(a.shape), "data": np.ravel(a).tolist()}
        return json.dumps({
            "format": "edspec.operator",
            "version": FORMAT_VERSION,
            "table": json.loads(self.table.to_json()),
            "rule": {"nodes": self.rule.nodes.tolist(), "weights": self.rule.weights.tolist(),
                     "tag": self.rule.tag},
            "R1": arr(self.R1), "R2_tilde": arr(self.R2_tilde), "V": arr(self.V),
            "S": arr(self.s), "U": arr(self.U), "moments": arr(self.moments),
        })

    @classmethod
    def from_json(cls, text: str) -> "GalerkinOperator":
        d = json.loads(text)
        if d.get("format") != "edspec.operator":
            raise ValueError("not an operator bundle")

        def arr(o):
            return np.array(o["data"], dtype=float).reshape(o["shape"])
        table = RecurrenceTable.from_json(json.dumps(d["table"]))
        rule = QuadratureRule(np.array(d["rule"]["nodes"]), np.array(d["rule"]["weights"]),
                              d["rule"]["tag"])
        return cls(table, rule, arr(d["R1"]), arr(d["R2_tilde"]), arr(d["V"]), arr(d["S"]),
                   arr(d["U"]), arr(d["moments"]))


def _positive_diag(R):
    sign = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return R * sign[:, None]


def assemble(table: RecurrenceTable, n: int | None = None, psi=default_psi,
             panel_order: int = 20, tail_panels: int | None = None,
             threads: int = 1, keep_basis: bool = True) -> GalerkinOperator:
    """Assemble and factor the projected operator on ``phi_0 .. phi_{n-1}``.

    The quadrature is the composite rule on the zeros of ``p_n``.
    """
    n = table.n_max if n is None else n
    if not 1 <= n <= table.n_max:
        raise ValueError(f"need 1 <= n <= {table.n_max}")
    table = table.truncate(n)
    rule = composite_rule(table, n, panel_order, tail_panels)
    x, mu = rule.nodes, rule.weights
    log2_wmu = log2_w(x) + np.log2(mu)
    E1 = _columns(table, n, x, 0.5 * log2_wmu, deriv=False, threads=threads)
    if not np.all(np.isfinite(E1)):
        raise ArithmeticError("non-finite basis values at the assembly nodes")
    R1 = _positive_diag(np.linalg.qr(E1, mode="r"))
    if n > 1:
        with np.errstate(divide="ignore"):
            log2_psi = np.log2(psi(x))
        E2 = _columns(table, n, x, 0.5 * (log2_psi + log2_wmu), deriv=True,
                      first=1, threads=threads)
        R2t = _positive_diag(np.linalg.qr(E2, mode="r"))
        del E2
        d = np.abs(np.diag(R2t))
        if d.min() <= 1e-300 or d.min() < np.finfo(float).eps * d.max() * 1e-4:
            raise DegenerateBasisError("stiffness factor is numerically singular")
        # pinv(R) = blockdiag(0, R1~ R2~^{-1}); X Sigma Y^T is its SVD
        P = solve_triangular(R2t, R1[1:, 1:].T, trans="T").T
        try:
            X, sig, Yt = svd(P, lapack_driver="gesdd")
        except LinAlgError:
            X, sig, Yt = svd(P, lapack_driver="gesvd")
    else:
        R2t = np.zeros((0, 0))
        X, sig, Yt = np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0))
    V = np.zeros((n, n))
    V[0, 0] = 1.0
    V[1:, 1:] = X
    U = np.zeros((n, n))
    U[0, 0] = 1.0
    U[1:, 1:] = Yt.T
    s = np.concatenate([[0.0], 1.0 / sig])
    # sign convention (Sturm ordering): eigenfunction j has a leading coefficient
    # of sign (-1)^j; since R1 has a positive diagonal that is the sign of V[n-1, j]
    lead = V[-1] * (-1.0) ** np.arange(n)
    flip = np.where(lead < 0.0, -1.0, 1.0)
    flip[0] = 1.0
    V *= flip
    U *= flip
    powers = x[:, None] ** np.arange(MOMENT_ORDERS)[None, :]
    G = E1.T @ (powers * np.exp2(0.5 * log2_wmu)[:, None])
    moments = solve_triangular(R1, G, trans="T")
    return GalerkinOperator(table, rule, R1, R2t, V, s, U, moments,
                            E1 if keep_basis else None)


# -- coefficients ---------------------------------------------------------------

def project_initial(f, op: GalerkinOperator) -> np.ndarray:
    """Coefficients of ``f`` in the corrected basis.

    ``beta_i = int f phi_i x^2 e^{-x^2} dx`` by quadrature, then
    ``alpha = R1^{-T} beta``.
    """
    x = op.rule.nodes
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != x.shape or not np.all(np.isfinite(vals)):
        raise ArithmeticError("initial condition is not finite at the quadrature nodes")
    beta = op.E1.T @ (vals * op.sqrt_wmu)
    return solve_triangular(op.R1, beta, trans="T")


def _log_double_factorial_ratio(j):
    """``log|(2j-3)!!| - log sqrt((2j+1)!)`` and the sign of ``(2j-3)!!``."""
    # (2j-3)!! = 2^(j-1) Gamma(j - 1/2) / sqrt(pi)
    if j == 0:
        return -0.5 * math.lgamma(2.0), -1.0
    lg = (j - 1) * math.log(2.0) + math.lgamma(j - 0.5) - 0.5 * math.log(math.pi)
    return lg - 0.5 * math.lgamma(2.0 * j + 2.0), 1.0


def analytic_alpha(example: int, parity: str | Parity, n: int) -> np.ndarray:
    """Closed-form coefficients of ``x`` (example 1) or ``x**2`` (example 2)
    in the orthonormal ``nu = 2`` half-line basis."""
    parity = Parity(parity)
    q = math.pi ** 0.25
    alpha = np.zeros(n)
    if parity is Parity.FULL:
        r = math.sqrt(6.0 * math.pi - 16.0)
        if example == 1:
            vals = [1.0 / q, r / (4.0 * q)]
        elif example == 2:
            vals = [0.75 * q, q / r, q * math.sqrt(9.0 * math.pi - 28.0) / (2.0 * r)]
        else:
            raise ValueError("example must be 1 or 2")
    else:
        if example == 1:
            vals = []
            for j in range(n):
                lg, sgn = _log_double_factorial_ratio(j)
                vals.append((-1.0) ** (j + 1) * sgn * math.exp(lg) / q)
        elif example == 2:
            vals = [0.75 * q, math.sqrt(6.0) * q / 4.0]
        else:
            raise ValueError("example must be 1 or 2")
    k = min(n, len(vals))
    alpha[:k] = vals[:k]
    return alpha


# -- evolution and diagnostics ------------------------------------------------------

def evolve(op: GalerkinOperator, alpha0, t: float) -> np.ndarray:
    """``V exp(-S^2 t) V^T alpha0``, exact in time."""
    if t < 0:
        raise ValueError("t must be non-negative")
    alpha0 = np.asarray(alpha0, dtype=float)
    return op.V @ (np.exp(-op.s ** 2 * t) * (op.V.T @ alpha0))


def eigenmode_amplitudes(op: GalerkinOperator, alpha0, t: float = 0.0,
                         include_zero: bool = False):
    """Eigenvalues ``s_j^2`` and amplitudes ``exp(-s_j^2 t) V_j^T alpha0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    gamma = np.exp(-op.s ** 2 * t) * (op.V.T @ np.asarray(alpha0, dtype=float))
    lam = op.s ** 2
    if not include_zero:
        lam, gamma = lam[1:], gamma[1:]
    return lam, gamma


def evaluate_solution(op: GalerkinOperator, alpha, xs, scaling: str | None = None):
    """``u_p(x) = Phi(x) R1^{-1} alpha``, optionally times ``exp(-x^2/2)``
    (``"exphalf"``) or ``exp(-x^2)`` (``"weight"``)."""
    gamma = solve_triangular(op.R1, np.asarray(alpha, dtype=float))
    B = basis_values(op.table, op.n, np.atleast_1d(xs), scaling)
    return B @ gamma


def moment(op: GalerkinOperator, alpha, k: int) -> float:
    """``int u_p x^k w dx`` over the assembly rule."""
    if k < 0:
        raise ValueError("k must be >= 0")
    alpha = np.asarray(alpha, dtype=float)
    if k < op.moments.shape[1]:
        return float(op.moments[:, k] @ alpha)
    x = op.rule.nodes
    g = solve_triangular(op.R1, op.E1.T @ (x ** k * op.sqrt_wmu), trans="T")
    return float(g @ alpha)


def mass(op: GalerkinOperator, alpha) -> float:
    return moment(op, alpha, 0)


def entropy(op: GalerkinOperator, alpha, method: str = "coefficients") -> float:
    """``S = -int U^2 x^2 e^{x^2} dx = -||u_p||_H^2``."""
    alpha = np.asarray(alpha, dtype=float)
    if method == "coefficients":
        return -float(alpha @ alpha)
    if method == "quadrature":
        vals = op.E1 @ solve_triangular(op.R1, alpha)
        return -float(vals @ vals)
    raise ValueError(f"unknown method {method!r}")


def eigenfunction_of_PL(op: GalerkinOperator, target: float):
    """Eigenvalue of ``PL`` closest to ``target`` and an evaluator for its
    eigenfunction (column ``j`` of ``Phi R1^{-1} V``)."""
    lam = op.s ** 2
    j = int(np.argmin(np.abs(lam - target)))
    coeffs = op.V[:, j].copy()

    def u(xs, scaling=None):
        return evaluate_solution(op, coeffs, xs, scaling)

    u.coefficients = coeffs
    u.index = j
    return float(lam[j]), u


class PointEvaluator:
    """Precomputed ``Phi(x) R1^{-1}`` at fixed points, for repeated evaluation."""

    def __init__(self, op: GalerkinOperator, xs, scaling: str | None = None):
        self.x = np.atleast_1d(np.asarray(xs, dtype=float))
        B = basis_values(op.table, op.n, self.x, scaling)
        self.A = solve_triangular(op.R1, B.T, trans="T").T
        self.n = op.n

    def __call__(self, alpha) -> np.ndarray:
        return self.A @ np.asarray(alpha, dtype=float)


class HNormComparator:
    """``||u_a - u_b||_H`` for many coefficient pairs on one quadrature rule.

    The rule defaults to ``op_b.rule``.  Points outside either operator's
    domain are skipped; the integrand there is assumed negligible (truncated
    domains only differ beyond ``x_max``).
    """

    def __init__(self, op_a: GalerkinOperator, op_b: GalerkinOperator,
                 rule: QuadratureRule | None = None):
        rule = op_b.rule if rule is None else rule
        x = rule.nodes
        keep = np.ones(x.shape, dtype=bool)
        for op in (op_a, op_b):
            if op.spec.x_max is not None:
                keep &= x <= op.spec.x_max
        x, mu = x[keep], rule.weights[keep]
        self.ea = PointEvaluator(op_a, x, "exphalf")
        self.eb = PointEvaluator(op_b, x, "exphalf")
        self.mu_x2 = x * x * mu

    def __call__(self, alpha_a, alpha_b) -> float:
        d = self.ea(alpha_a) - self.eb(alpha_b)
        return float(np.sqrt(np.sum(d * d * self.mu_x2)))


def h_norm_difference(op_a: GalerkinOperator, alpha_a, op_b: GalerkinOperator, alpha_b,
                      rule: QuadratureRule | None = None) -> float:
    """``||u_a - u_b||_H`` by quadrature on ``rule`` (default: ``op_b.rule``)."""
    return HNormComparator(op_a, op_b, rule)(alpha_a, alpha_b)


def maxwellian_entropy() -> float:
    return -SQRT_PI / 4.0


def build_operator(spec: WeightSpec, n: int, panel_order: int = 20, threads: int = 1,
                   keep_basis: bool = True) -> GalerkinOperator:
    """Recurrence for ``p_0 .. p_n`` followed by :func:`assemble` at dimension ``n``."""
    from .orthopoly import build_recurrence, even_recurrence_closed_form
    if spec == WeightSpec(2, None, Parity.EVEN):
        table = even_recurrence_closed_form(n + 1)
    else:
        table = build_recurrence(spec, n + 1, panel_order)
    return assemble(table, n, panel_order=panel_order, threads=threads, keep_basis=keep_basis)
