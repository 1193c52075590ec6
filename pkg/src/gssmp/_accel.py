"""Optional numba acceleration.

Set ``GSSMP_NUMBA=0`` in the environment to force the pure-numpy kernels.
When numba is not importable the numpy kernels are used regardless.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("GSSMP_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def njit(func):
    """``numba.njit(cache=True)`` when numba is available, identity otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
