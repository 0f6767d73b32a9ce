"""Switch between numba-compiled kernels and their pure-Python fallback.

Set ``RELOSC_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python. The fallback is also used, with a warning, when numba is missing.
"""

import os
import warnings

__all__ = ["jit", "NUMBA_ENABLED", "PerformanceWarning"]


class PerformanceWarning(UserWarning):
    pass


def _truthy(value):
    return value.strip().lower() in ("1", "true", "yes", "on")


_disabled = _truthy(os.environ.get("RELOSC_DISABLE_NUMBA", ""))

try:
    import numba
except ImportError:  # pragma: no cover - numba ships with the dev env
    numba = None

NUMBA_ENABLED = numba is not None and not _disabled

if numba is None and not _disabled:  # pragma: no cover
    warnings.warn(
        "numba is not available; relosc kernels run as pure Python",
        PerformanceWarning,
        stacklevel=2,
    )


def jit(func):
    """``numba.njit(cache=True, nogil=True)`` or the identity."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(func)
    return func
