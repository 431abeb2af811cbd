"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is used.  Setting ``EDSPEC_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("EDSPEC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

root_product = _impl.root_product
root_product_deriv = _impl.root_product_deriv

__all__ = ["BACKEND", "root_product", "root_product_deriv"]
