"""Optional numba acceleration.

Set ``SYNCNET_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
"""
import os

try:
    from numba import njit as _njit
    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    NUMBA_INSTALLED = False

_FLAG = os.environ.get("SYNCNET_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = NUMBA_INSTALLED and _FLAG not in ("1", "true", "yes", "on")


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Unlike ``USE_NUMBA`` this ignores the env flag: the jitted variants are
    always built when possible so both paths can be compared side by side.
    """
    def decorator(func):
        if NUMBA_INSTALLED:
            return _njit(*args, **kwargs)(func)
        return func
    return decorator
