"""Pure numpy versions of the root-product kernels.

Same contract as the compiled module; vectorised over nodes with a Python
loop over roots, so it is several times slower for large degrees.
"""

import numpy as np

_BLOCK = 8


def root_product(x, roots):
    x = np.ascontiguousarray(x, dtype=np.float64)
    roots = np.ascontiguousarray(roots, dtype=np.float64)
    p = np.ones_like(x)
    e = np.zeros(x.shape, dtype=np.int64)
    for start in range(0, roots.shape[0], _BLOCK):
        blk = roots[start:start + _BLOCK]
        p = p * np.prod(x[:, None] - blk[None, :], axis=1)
        p, s = np.frexp(p)
        e += s
    return _finish(p, e)


def root_product_deriv(x, roots):
    x = np.ascontiguousarray(x, dtype=np.float64)
    roots = np.ascontiguousarray(roots, dtype=np.float64)
    p = np.ones_like(x)
    d = np.zeros_like(x)
    e = np.zeros(x.shape, dtype=np.int64)
    for k, r in enumerate(roots):
        fac = x - r
        d = d * fac + p
        p = p * fac
        if k % _BLOCK == _BLOCK - 1:
            p, d, e = _rescale(p, d, e)
    p, d, e = _rescale(p, d, e)
    big = np.maximum(np.abs(p), np.abs(d))
    zero = big == 0.0
    _, s = np.frexp(np.where(zero, 1.0, big))
    mant = np.where(zero, 0.0, np.ldexp(p, 1 - s))
    dmant = np.where(zero, 0.0, np.ldexp(d, 1 - s))
    expo = np.where(zero, 0, e + s - 1)
    return mant, dmant, expo.astype(np.int64)


def _rescale(p, d, e):
    big = np.maximum(np.abs(p), np.abs(d))
    _, s = np.frexp(np.where(big == 0.0, 1.0, big))
    return np.ldexp(p, -s), np.ldexp(d, -s), e + s


def _finish(p, e):
    m, s = np.frexp(p)
    zero = m == 0.0
    mant = np.where(zero, 0.0, 2.0 * m)
    expo = np.where(zero, 0, e + s - 1)
    return mant, expo.astype(np.int64)
