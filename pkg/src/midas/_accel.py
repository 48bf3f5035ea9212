"""Optional numba acceleration.

Set ``MIDAS_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is
read once at import time.
"""
import os

_DISABLED = os.environ.get("MIDAS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED

# fastmath stays off: kernels must match the numpy path bit for bit where
# the arithmetic order is the same.
njit_kwargs = {"nogil": True, "cache": False, "fastmath": False}


def njit(func):
    if not HAVE_NUMBA:
        return func
    return _numba.njit(**njit_kwargs)(func)
