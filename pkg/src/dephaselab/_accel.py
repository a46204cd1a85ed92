"""Switch between numba-compiled kernels and the pure-numpy fallback.

Set ``DEPHASELAB_DISABLE_NUMBA=1`` before importing the package to force the
numpy path (also used automatically when numba is not importable).
"""

import os

_FLAG = "DEPHASELAB_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get(_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as is."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)
