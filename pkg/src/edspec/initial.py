"""Initial conditions used by the examples and the CLI."""

from __future__ import annotations

import numpy as np


def example_1(x):
    return np.asarray(x, dtype=float)


def example_2(x):
    x = np.asarray(x, dtype=float)
    return x * x


def two_hump(x):
    """Two bumps near ``x = 3`` and ``x = 12.75`` with a smooth cutoff at 15.

    ``[5/2 (x/3.25)^30 + 155/64 (x/8.25)^200] exp(-15/(15-x))`` on
    ``0 < x < 15`` and zero elsewhere; evaluated in log space since the
    second power reaches ``1e52``.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0.0) & (x < 15.0)
    z = x[inside]
    a = np.log(2.5) + 30.0 * np.log(z / 3.25)
    b = np.log(155.0 / 64.0) + 200.0 * np.log(z / 8.25)
    out[inside] = np.exp(np.logaddexp(a, b) - 15.0 / (15.0 - z))
    return out


EXAMPLES = {1: example_1, 2: example_2, 15: two_hump}
