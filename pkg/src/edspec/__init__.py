"""Spectral-Galerkin solver for the energy-diffusion equation
``u_t = (Psi w u_x)_x / w`` on the half-line or a truncated interval,
using polynomials orthogonal under ``x**nu exp(-x**2)``."""

__version__ = "0.1.0"

from . import kernels  # noqa: E402
from .weight import Parity, WeightSpec  # noqa: E402

__all__ = ["kernels", "Parity", "WeightSpec", "__version__"]
