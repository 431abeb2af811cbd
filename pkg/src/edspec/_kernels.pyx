# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled root-product kernels.

Both kernels evaluate a monic polynomial given by its roots, carrying an
extra integer exponent per node so that neither the running product nor its
derivative can overflow or underflow.  Nodes are processed in cache-sized
chunks with the root loop outermost so the update vectorises; magnitudes are
checked every ``_BLOCK`` roots, which is safe while ``|x - root| < 2**60``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport frexp, ldexp, fabs

cnp.import_array()

cdef enum:
    _CHUNK = 256
    _BLOCK = 8

cdef double _BIG = 1.157920892373162e+77    # 2**256
cdef double _SMALL = 8.636168555094445e-78  # 2**-256


cdef inline void _renorm(double *p, long *e, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a
    cdef int s
    for i in range(c):
        a = fabs(p[i])
        if a > _BIG or (a < _SMALL and a != 0.0):
            p[i] = frexp(p[i], &s)
            e[i] += s


cdef inline void _renorm2(double *p, double *d, long *e, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a, b
    cdef int s
    for i in range(c):
        a = fabs(p[i])
        b = fabs(d[i])
        if b > a:
            a = b
        if a > _BIG or (a < _SMALL and a != 0.0):
            frexp(a, &s)
            p[i] = ldexp(p[i], -s)
            d[i] = ldexp(d[i], -s)
            e[i] += s


def root_product(const double[::1] x, const double[::1] roots):
    """Return ``(mant, expo)`` with ``prod_k (x - roots[k]) = mant * 2**expo``.

    ``mant`` is normalised to ``1 <= |mant| < 2`` or is exactly zero.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = roots.shape[0]
    cdef Py_ssize_t i, k, lo, c
    cdef double r
    cdef int s
    cdef double p[_CHUNK]
    cdef long e[_CHUNK]
    mant_arr = np.empty(n, dtype=np.float64)
    expo_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] mant = mant_arr
    cdef cnp.int64_t[::1] expo = expo_arr
    with nogil:
        lo = 0
        while lo < n:
            c = n - lo
            if c > _CHUNK:
                c = _CHUNK
            for i in range(c):
                p[i] = 1.0
                e[i] = 0
            for k in range(m):
                r = roots[k]
                for i in range(c):
                    p[i] = p[i] * (x[lo + i] - r)
                if k % _BLOCK == _BLOCK - 1:
                    _renorm(p, e, c)
            for i in range(c):
                if p[i] == 0.0:
                    mant[lo + i] = 0.0
                    expo[lo + i] = 0
                else:
                    mant[lo + i] = 2.0 * frexp(p[i], &s)
                    expo[lo + i] = e[i] + s - 1
            lo += c
    return mant_arr, expo_arr


def root_product_deriv(const double[::1] x, const double[::1] roots):
    """Return ``(mant, dmant, expo)`` for the product and its x-derivative.

    Both share the exponent: ``p = mant * 2**expo`` and ``p' = dmant * 2**expo``,
    normalised so the larger of ``|mant|``, ``|dmant|`` lies in ``[1, 2)``.
    The derivative is accumulated by the product rule ``D <- D*f + P``, which
    stays finite when a node sits on a root.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = roots.shape[0]
    cdef Py_ssize_t i, k, lo, c
    cdef double r, f, a, b
    cdef int s
    cdef double p[_CHUNK]
    cdef double d[_CHUNK]
    cdef long e[_CHUNK]
    mant_arr = np.empty(n, dtype=np.float64)
    dmant_arr = np.empty(n, dtype=np.float64)
    expo_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] mant = mant_arr
    cdef double[::1] dmant = dmant_arr
    cdef cnp.int64_t[::1] expo = expo_arr
    with nogil:
        lo = 0
        while lo < n:
            c = n - lo
            if c > _CHUNK:
                c = _CHUNK
            for i in range(c):
                p[i] = 1.0
                d[i] = 0.0
                e[i] = 0
            for k in range(m):
                r = roots[k]
                for i in range(c):
                    f = x[lo + i] - r
                    d[i] = d[i] * f + p[i]
                    p[i] = p[i] * f
                if k % _BLOCK == _BLOCK - 1:
                    _renorm2(p, d, e, c)
            for i in range(c):
                a = fabs(p[i])
                b = fabs(d[i])
                if b > a:
                    a = b
                if a == 0.0:
                    mant[lo + i] = 0.0
                    dmant[lo + i] = 0.0
                    expo[lo + i] = 0
                else:
                    frexp(a, &s)
                    mant[lo + i] = ldexp(p[i], 1 - s)
                    dmant[lo + i] = ldexp(d[i], 1 - s)
                    expo[lo + i] = e[i] + s - 1
            lo += c
    return mant_arr, dmant_arr, expo_arr
