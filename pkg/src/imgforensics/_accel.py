"""Numba switch.

Kernels are written once as plain Python loops and compiled with numba when
available.  Setting ``IMGFORENSICS_DISABLE_NUMBA=1`` (or running without numba
installed) selects the pure-numpy / pure-Python fallbacks instead.
"""

import os

DISABLE_ENV = "IMGFORENSICS_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _flag_set(value):
    return value.strip().lower() not in ("", "0", "false", "no")


NUMBA_ENABLED = HAVE_NUMBA and not _flag_set(os.environ.get(DISABLE_ENV, ""))


def compile_kernel(fn):
    """Return the njit-compiled kernel (nogil, on-disk cache)."""
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    return numba.njit(cache=True, nogil=True)(fn)


def maybe_jit(fn):
    return compile_kernel(fn) if NUMBA_ENABLED else fn
