"""Numba switch.

Set ``BNOPRISK_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. when
debugging or on platforms without an LLVM toolchain.
"""

import os

_DISABLED = os.environ.get("BNOPRISK_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)
