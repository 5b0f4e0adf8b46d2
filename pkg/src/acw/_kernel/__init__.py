"""Polynomial kernel with compiled fast path.

Imports the Cython extension when available; set ACW_PURE=1 to force the
pure-Python kernel (used by the benchmark and the backend-equality test).
"""

import os

from . import pure

if os.environ.get("ACW_PURE") == "1":
    _impl = pure
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
mono_mul = _impl.mono_mul
poly_add = _impl.poly_add
poly_sub = _impl.poly_sub
poly_neg = _impl.poly_neg
poly_scale = _impl.poly_scale
poly_mul = _impl.poly_mul
poly_pow = _impl.poly_pow
