"""JIT switch for the numeric kernels.

Set ``BRIDGEFUSE_NO_JIT=1`` to force the pure-numpy kernels; numba is also
skipped silently when it is not importable.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("BRIDGEFUSE_NO_JIT", "").strip().lower()

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def jit(func):
    """``njit(cache=True)`` when numba is importable, identity otherwise."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
