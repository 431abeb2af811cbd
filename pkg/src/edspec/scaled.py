"""Floating point numbers with an extended exponent range.

A :class:`ScaledValue` stores ``significand * 2**exponent`` with the
significand normalised to ``1 <= |s| < 2`` (or exactly zero) and an
unbounded Python integer exponent.  The array helpers at the bottom work on
``(mant, expo)`` pairs of numpy arrays, which is how the polynomial kernels
return their results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CollapseOverflowError(OverflowError):
    """A scaled value does not fit in an ordinary float."""


@dataclass(frozen=True)
class ScaledValue:
    significand: float
    exponent: int = 0

    def __post_init__(self):
        s = float(self.significand)
        if not math.isfinite(s):
            raise ValueError(f"non-finite significand {s!r}")
        if s == 0.0:
            object.__setattr__(self, "significand", 0.0)
            object.__setattr__(self, "exponent", 0)
            return
        m, k = math.frexp(s)
        object.__setattr__(self, "significand", 2.0 * m)
        object.__setattr__(self, "exponent", int(self.exponent) + k - 1)

    @classmethod
    def from_float(cls, x: float) -> "ScaledValue":
        return cls(x, 0)

    @classmethod
    def from_log2(cls, log2_abs: float, sign: float = 1.0) -> "ScaledValue":
        """Build ``sign * 2**log2_abs`` without forming the power."""
        if log2_abs == -math.inf:
            return cls(0.0)
        k = math.floor(log2_abs)
        return cls(math.copysign(2.0 ** (log2_abs - k), sign), k)

    def __float__(self) -> float:
        return self.to_float()

    def to_float(self) -> float:
        """Collapse to a float; raises :class:`CollapseOverflowError` if too large.

        Values below the subnormal range round to zero.
        """
        if self.significand == 0.0:
            return 0.0
        if self.exponent > 1023:
            raise CollapseOverflowError(f"2**{self.exponent} exceeds float range")
        return math.ldexp(self.significand, self.exponent)

    @property
    def sign(self) -> float:
        return math.copysign(1.0, self.significand) if self.significand else 0.0

    def log2_abs(self) -> float:
        if self.significand == 0.0:
            return -math.inf
        return self.exponent + math.log2(abs(self.significand))

    def __mul__(self, other):
        if isinstance(other, ScaledValue):
            return ScaledValue(self.significand * other.significand,
                               self.exponent + other.exponent)
        return ScaledValue(self.significand * float(other), self.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScaledValue):
            if other.significand == 0.0:
                raise ZeroDivisionError("division by scaled zero")
            return ScaledValue(self.significand / other.significand,
                               self.exponent - other.exponent)
        return ScaledValue(self.significand / float(other), self.exponent)

    def __neg__(self):
        return ScaledValue(-self.significand, self.exponent)

    def __abs__(self):
        return ScaledValue(abs(self.significand), self.exponent)

    def __add__(self, other):
        if not isinstance(other, ScaledValue):
            other = ScaledValue(float(other))
        if self.significand == 0.0:
            return other
        if other.significand == 0.0:
            return self
        e = max(self.exponent, other.exponent)
        s = (math.ldexp(self.significand, self.exponent - e)
             + math.ldexp(other.significand, other.exponent - e))
        return ScaledValue(s, e)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def sqrt(self) -> "ScaledValue":
        if self.significand < 0.0:
            raise ValueError("square root of a negative value")
        if self.exponent % 2:
            return ScaledValue(math.sqrt(2.0 * self.significand), (self.exponent - 1) // 2)
        return ScaledValue(math.sqrt(self.significand), self.exponent // 2)

    def __eq__(self, other):
        if isinstance(other, ScaledValue):
            return (self.significand, self.exponent) == (other.significand, other.exponent)
        try:
            return self == ScaledValue(float(other))
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.significand, self.exponent))

    def __lt__(self, other):
        if not isinstance(other, ScaledValue):
            other = ScaledValue(float(other))
        return (self - other).significand < 0.0

    def __repr__(self):
        return f"ScaledValue({self.significand!r}, {self.exponent})"


def product(factors) -> ScaledValue:
    """Multiply floats with renormalisation after every factor."""
    m, e = 1.0, 0
    for f in factors:
        m *= float(f)
        if m == 0.0:
            return ScaledValue(0.0)
        m, k = math.frexp(m)
        e += k
    return ScaledValue(m, e)


# -- array helpers ---------------------------------------------------------

def log2_abs(mant, expo):
    """Elementwise ``log2 |mant * 2**expo|`` (``-inf`` for zeros)."""
    mant = np.asarray(mant, dtype=float)
    with np.errstate(divide="ignore"):
        return np.asarray(expo, dtype=float) + np.log2(np.abs(mant))


def collapse(mant, log2_scale):
    """Return ``mant * 2**log2_scale`` with a real-valued exponent.

    The integer part of the exponent is applied with ``ldexp`` so that huge
    and tiny factors cancel exactly before the product is formed.  Raises
    :class:`CollapseOverflowError` when a finite result cannot be represented.
    """
    mant = np.asarray(mant, dtype=float)
    log2_scale = np.asarray(log2_scale, dtype=float)
    log2_scale = np.where(mant == 0.0, 0.0, log2_scale)
    if np.any(np.isposinf(log2_scale)) or np.any(np.isnan(log2_scale)):
        raise CollapseOverflowError("exponent is not finite")
    k = np.floor(np.where(np.isneginf(log2_scale), -2000.0, log2_scale))
    frac = np.where(np.isneginf(log2_scale), 0.0, log2_scale - k)
    k = np.clip(k, -4000, 4000).astype(np.int64)
    with np.errstate(over="ignore"):
        out = np.ldexp(mant * np.exp2(frac), k)
    if not np.all(np.isfinite(out)):
        raise CollapseOverflowError("value exceeds float range after folding")
    return out


def scaled_sum(mant, log2_scale):
    """Sum ``mant_k * 2**log2_scale_k`` into a single :class:`ScaledValue`."""
    mant = np.asarray(mant, dtype=float)
    log2_scale = np.asarray(log2_scale, dtype=float)
    live = (mant != 0.0) & np.isfinite(log2_scale)
    if not np.any(live):
        return ScaledValue(0.0)
    top = math.floor(float(np.max(log2_scale[live])))
    total = float(np.sum(collapse(np.where(live, mant, 0.0),
                                  np.where(live, log2_scale - top, 0.0))))
    return ScaledValue(total, top)
