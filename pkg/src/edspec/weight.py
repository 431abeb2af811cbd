"""Weight families ``x**nu * exp(-x**2)`` and the diffusion coefficient Psi."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf

LOG2E = 1.0 / math.log(2.0)
SQRT_PI = math.sqrt(math.pi)


class Parity(str, Enum):
    FULL = "full"
    EVEN = "even"


@dataclass(frozen=True)
class WeightSpec:
    """Identifies one polynomial family.

    ``x_max=None`` is the half-line ``(0, inf)``; a positive ``x_max`` is the
    truncated interval ``(0, x_max)``.  ``parity="even"`` takes the even
    polynomials for the evenly extended weight, run as a recurrence in
    ``t = x**2``.
    """

    nu: int = 2
    x_max: float | None = None
    parity: Parity = Parity.FULL

    def __post_init__(self):
        if self.nu not in (0, 2, 4):
            raise ValueError(f"nu must be one of 0, 2, 4 (got {self.nu!r})")
        object.__setattr__(self, "parity", Parity(self.parity))
        if self.x_max is not None:
            if not (self.x_max > 0 and math.isfinite(self.x_max)):
                raise ValueError(f"x_max must be a positive finite number (got {self.x_max!r})")
            object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def half_line(self) -> bool:
        return self.x_max is None

    @property
    def even(self) -> bool:
        return self.parity is Parity.EVEN

    def log2_rho(self, x):
        """``log2 rho(x)`` elementwise; ``-inf`` where rho vanishes."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = -x * x * LOG2E
            if self.nu:
                out = out + self.nu * np.log2(x)
        return out

    def rho(self, x):
        return np.exp2(self.log2_rho(x))

    def to_dict(self) -> dict:
        return {"nu": self.nu, "x_max": self.x_max, "parity": self.parity.value}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSpec":
        return cls(nu=int(d["nu"]), x_max=d.get("x_max"), parity=d.get("parity", "full"))

    def label(self) -> str:
        dom = "half-line" if self.half_line else f"[0,{self.x_max:g}]"
        return f"nu={self.nu} {self.parity.value} {dom}"


def log2_w(x):
    """``log2`` of the Hilbert-space weight ``w(x) = x**2 exp(-x**2)``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 * np.log2(x) - x * x * LOG2E


def w(x):
    x = np.asarray(x, dtype=float)
    return x * x * np.exp(-x * x)


# Psi(x) = [erf(x) - 2 x exp(-x^2)/sqrt(pi)] / (2 x^3)
#        = (1/sqrt(pi)) * sum_{n>=1} (-1)^(n+1) 2n / (n! (2n+1)) x^(2n-2)
_PSI_SERIES_X = 0.5
_PSI_TERMS = 24
_PSI_COEF = np.array([(-1) ** (k + 1) * 2.0 * k / (math.factorial(k) * (2 * k + 1))
                      for k in range(1, _PSI_TERMS + 1)]) / SQRT_PI
_DPSI_COEF = np.array([(2 * k - 2) * c for k, c in enumerate(_PSI_COEF, start=1)])[1:]


def psi(x):
    """The energy-diffusion coefficient, with a Maclaurin branch near 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _PSI_SERIES_X
    xs = x[small]
    out[small] = np.polynomial.polynomial.polyval(xs * xs, _PSI_COEF)
    xl = x[~small]
    out[~small] = (erf(xl) - 2.0 / SQRT_PI * xl * np.exp(-xl * xl)) / (2.0 * xl ** 3)
    return out


def dpsi(x):
    """Derivative of :func:`psi`; uses ``psi' = (2 e^{-x^2}/sqrt(pi) - 3 psi)/x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _PSI_SERIES_X
    xs = x[small]
    out[small] = xs * np.polynomial.polynomial.polyval(xs * xs, _DPSI_COEF)
    xl = x[~small]
    out[~small] = (2.0 / SQRT_PI * np.exp(-xl * xl) - 3.0 * psi(xl)) / xl
    return out
