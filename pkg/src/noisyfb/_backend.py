"""Kernel backend selection.

Set ``NOISYFB_DISABLE_NUMBA=1`` to run every hot path through the vectorized
numpy implementations instead of the numba-compiled loops.
"""

import os

_FLAG = os.environ.get("NOISYFB_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in ("1", "true", "yes", "on")

try:
    if DISABLED_BY_ENV:
        raise ImportError("numba disabled by NOISYFB_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
