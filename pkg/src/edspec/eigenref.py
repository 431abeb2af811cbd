"""Reference solutions of ``L u = lambda u`` with ``u(0) = 1``.

The bounded solution is launched from a two-term Frobenius series at a small
``x0`` and integrated outward with an explicit order-8 Runge-Kutta pair in
the scaled variables ``y1 = u exp(-x^2/2)``, ``y2 = u' exp(-x^2/2)``, which
stay O(1) while ``u`` itself grows like ``exp(x^2/2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar
from scipy.signal import argrelextrema

from .weight import SQRT_PI, dpsi, psi

PSI0 = 2.0 / (3.0 * SQRT_PI)
PSI2 = -0.6  # Psi(x) = PSI0 (1 + PSI2 x^2 + ...)
X0_DEFAULT = 1e-3
STEP_TOL_FACTOR = 0.1
MAX_STEP = 0.05  # keeps the order-7 dense output at the step accuracy


class IntegrationError(ArithmeticError):
    """The ODE integrator failed (step size underflow or tolerance not met)."""


class EnvelopeFitError(ValueError):
    """The envelope fit residual is too large for the chosen window."""


def series_coefficients(lam: float):
    """``c2, c4`` of the bounded solution ``u = 1 + c2 x^2 + c4 x^4 + ...``."""
    c2 = -lam / (6.0 * PSI0)
    c4 = (-lam * c2 / PSI0 - c2 * (10.0 * PSI2 - 4.0)) / 20.0
    return c2, c4


_TWO_RSQPI = 2.0 / SQRT_PI


def _psi_scalar(x):
    """``(Psi(x), Psi'(x))`` for a float, matching :func:`edspec.weight.psi`."""
    if x < 0.5:
        a = np.array([x])
        return float(psi(a)[0]), float(dpsi(a)[0])
    e = math.exp(-x * x)
    p = (math.erf(x) - _TWO_RSQPI * x * e) / (2.0 * x ** 3)
    return p, (_TWO_RSQPI * e - 3.0 * p) / x


def _rhs(lam):
    def f(x, y):
        y1, y2 = y
        p, dp = _psi_scalar(x)
        drift = dp / p + 2.0 / x - 2.0 * x
        return [y2 - x * y1, -(drift * y2 + lam * y1 / p) - x * y2]
    return f


@dataclass(eq=False)
class EigenSolution:
    """Samples of ``u`` and ``u'`` with the fitted envelope parameters.

    ``dense`` is the integrator's continuous extension in the scaled
    variables; it is not serialised.
    """

    lam: float
    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    tol: float
    A0: float = math.nan
    theta0: float = math.nan
    x0: float = X0_DEFAULT
    dense: object = field(default=None, repr=False)

    @property
    def u_scaled(self) -> np.ndarray:
        return self.u * np.exp(-0.5 * self.x ** 2)

    def scaled(self, xs) -> np.ndarray:
        """``u(x) exp(-x^2/2)`` at arbitrary points in ``[0, x_max]``."""
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        small = xs < self.x0
        if np.any(small):
            c2, c4 = series_coefficients(self.lam)
            z = xs[small]
            out[small] = (1.0 + c2 * z * z + c4 * z ** 4) * np.exp(-0.5 * z * z)
        if np.any(~small):
            out[~small] = self.dense(xs[~small])[0]
        return out

    def header(self) -> dict:
        return {"lambda": self.lam, "A0": self.A0, "theta0": self.theta0, "tol": self.tol}

    def to_csv(self) -> str:
        lines = ["# " + json.dumps(self.header(), sort_keys=True), "x,u,u_scaled"]
        lines += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(self.x, self.u, self.u_scaled)]
        return "\n".join(lines) + "\n"


def _sample_grid(lam: float, x0: float, x_max: float, per_wave: int = 40):
    # local frequency of u e^{-x^2/2} is about sqrt(2 lam) x^{3/2}
    kmax = max(1.0, math.sqrt(2.0 * max(lam, 1e-12)) * x_max ** 1.5)
    h = min(0.01, 2.0 * math.pi / (per_wave * kmax))
    return np.concatenate([[0.0], np.arange(x0, x_max, h), [x_max]])


def solve_ode(lam: float, x_max: float = 20.0, tol: float = 1e-12, x0: float = X0_DEFAULT,
              xs=None) -> EigenSolution:
    """Integrate the bounded solution of ``L u = lam u`` on ``[0, x_max]``.

    Parameters
    ----------
    lam : float
        Eigenparameter, ``lam >= 0``.
    x_max : float
        Right end, at most 30 (``u`` overflows soon after).
    tol : float
        Target accuracy of the scaled variables; the integrator's step
        tolerance is ``tol/10``.
    x0 : float
        Series launch point.
    xs : array_like, optional
        Sample points; by default a grid resolving the local oscillation.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not 0 < x_max <= 30:
        raise ValueError("x_max must lie in (0, 30]")
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    if not 0 < x0 < min(0.05, x_max):
        raise ValueError("x0 must be small and positive")
    c2, c4 = series_coefficients(lam)
    e0 = math.exp(-0.5 * x0 * x0)
    y0 = [(1.0 + c2 * x0 ** 2 + c4 * x0 ** 4) * e0, (2.0 * c2 * x0 + 4.0 * c4 * x0 ** 3) * e0]
    # tol is a global target; local errors accumulate to roughly 15x the step tolerance
    step_tol = max(tol * STEP_TOL_FACTOR, 2.5e-14)
    sol = solve_ivp(_rhs(lam), (x0, x_max), y0, method="DOP853", rtol=step_tol, atol=step_tol,
                    dense_output=True, max_step=MAX_STEP)
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}")
    if xs is None:
        xs = _sample_grid(lam, x0, x_max)
    xs = np.asarray(xs, dtype=float)
    inner = xs >= x0
    y = np.empty((2, xs.shape[0]))
    y[:, inner] = sol.sol(xs[inner])
    z = xs[~inner]
    y[0, ~inner] = (1.0 + c2 * z * z + c4 * z ** 4) * np.exp(-0.5 * z * z)
    y[1, ~inner] = (2.0 * c2 * z + 4.0 * c4 * z ** 3) * np.exp(-0.5 * z * z)
    grow = np.exp(0.5 * xs * xs)
    return EigenSolution(float(lam), xs, y[0] * grow, y[1] * grow, float(tol),
                         x0=float(x0), dense=sol.sol)


def envelope(lam: float, x):
    """Asymptotic amplitude ``p(x)`` and phase ``q(x)`` of ``u exp(-x^2/2)``."""
    x = np.asarray(x, dtype=float)
    z = 1.0 / (x * lam)
    p = x ** -0.25 * (1.0 + z / 8.0 + 5.0 * z ** 2 / 128.0 + 15.0 * z ** 3 / 1024.0)
    q = np.sqrt(2.0 * lam * x ** 5) * (
        0.4 - z / 6.0 - z ** 2 / 16.0 + z ** 3 / 64.0 + 5.0 * z ** 4 / 3072.0
        + (7.0 - 1152.0 * lam ** 4) * z ** 5 / 20480.0)
    return p, q


def fit_envelope(sol: EigenSolution, lam: float | None = None, window=(8.0, 14.0),
                 points: int = 4000):
    """Least-squares fit of ``A0 p cos(q + theta0)`` to ``u exp(-x^2/2)``.

    Linear in ``C = A0 cos(theta0)`` and ``D = -A0 sin(theta0)``.  Returns
    ``(A0, theta0)`` with ``theta0`` in ``(-pi, pi]`` and stores them on
    ``sol``.
    """
    lam = sol.lam if lam is None else lam
    lo, hi = map(float, window)
    if lo < 5.0 or not lo < hi:
        raise ValueError("window must satisfy 5 <= x_lo < x_hi")
    if hi > sol.x[-1] * (1 + 1e-12):
        raise ValueError("window exceeds the sampled range")
    xs = np.linspace(lo, hi, points)
    y = sol.scaled(xs)
    p, q = envelope(lam, xs)
    A = np.column_stack([p * np.cos(q), p * np.sin(q)])
    (C, D), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [C, D] - y) ** 2)))
    bound = 10.0 * lo ** -3.75
    if resid > bound:
        raise EnvelopeFitError(f"fit residual {resid:.3g} exceeds {bound:.3g}")
    A0 = math.hypot(C, D)
    theta0 = math.atan2(-D, C)
    if theta0 == -math.pi:
        theta0 = math.pi
    sol.A0, sol.theta0 = A0, theta0
    return A0, theta0


@dataclass
class ResidualReport:
    """Local extrema of ``r(x) = [s u_p(x) - u(x)] exp(-x^2/2)``."""

    scale: float
    x: np.ndarray
    r: np.ndarray

    def max_abs(self, lo: float = -math.inf, hi: float = math.inf) -> float:
        keep = (self.x >= lo) & (self.x <= hi)
        return float(np.max(np.abs(self.r[keep]))) if np.any(keep) else 0.0

    def extrema(self):
        return list(zip(self.x.tolist(), self.r.tolist()))


def residual_diagnostic(u_p, u_ref: EigenSolution, scale: float | None = None,
                        window=(0.125, 6.0), x_range=None, points: int = 20001):
    """Extrema of the scaled residual between a projected eigenfunction and
    the ODE solution.

    Parameters
    ----------
    u_p : callable
        ``u_p(xs)`` returning ``u_p(x) exp(-x^2/2)``.
    u_ref : EigenSolution
        Solved with the same eigenparameter as ``u_p``.
    scale : float, optional
        Fixed rescaling of ``u_p``.  If omitted, a least-squares value on
        ``window`` is refined by minimising ``max |r|`` there.
    x_range : (float, float), optional
        Scan range, default ``[0, x_max]`` of ``u_ref``.
    """
    lo, hi = (0.0, float(u_ref.x[-1])) if x_range is None else map(float, x_range)
    xs = np.linspace(lo, hi, points)
    up = np.asarray(u_p(xs), dtype=float)
    ur = u_ref.scaled(xs)
    if scale is None:
        mid = (xs >= window[0]) & (xs <= window[1])
        s0 = float(up[mid] @ ur[mid] / (up[mid] @ up[mid]))

        def peak(s):
            return float(np.max(np.abs(s * up[mid] - ur[mid])))
        # bracket generously around the least-squares value
        lo_s, hi_s = sorted((s0 * (1 - 1e-2), s0 * (1 + 1e-2)))
        res = minimize_scalar(peak, bounds=(lo_s, hi_s),
                              method="bounded", options={"xatol": abs(s0) * 1e-14})
        scale = float(res.x) if res.fun <= peak(s0) else s0
    r = scale * up - ur
    a = np.abs(r)
    idx = argrelextrema(a, np.greater_equal, order=1)[0]
    idx = np.unique(np.concatenate([[0], idx, [len(a) - 1]]))
    return ResidualReport(float(scale), xs[idx], r[idx])


def gibbs_overshoot(u_p, u_ref: EigenSolution, scale: float, x_hi: float = 0.125,
                    points: int = 2001):
    """Maximum of ``|scale u_p - u|`` scaled by ``exp(-x^2/2)`` on ``[0, x_hi]``."""
    xs = np.linspace(0.0, x_hi, points)
    r = scale * u_p(xs) - u_ref.scaled(xs)
    i = int(np.argmax(np.abs(r)))
    return float(xs[i]), float(r[i])
