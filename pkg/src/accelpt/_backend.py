"""Kernel backend selection.

Hot loops are written twice: a numba ``@njit`` version and a vectorised numpy
version.  The numba path is used when numba imports cleanly and the
environment variable ``ACCELPT_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os

_flag = os.environ.get("ACCELPT_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("numba disabled by ACCELPT_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
