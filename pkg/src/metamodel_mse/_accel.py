"""Kernel backend selection.

``METAMODEL_MSE_BACKEND`` picks the implementation of the hot loops:
``numba`` (default when importable) or ``numpy``. Both backends draw the
same random variates; results agree to rounding, not bitwise.
"""

from __future__ import annotations

import os
import warnings

BACKEND_ENV = "METAMODEL_MSE_BACKEND"

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def selected_backend() -> str:
    requested = os.environ.get(BACKEND_ENV, "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        warnings.warn("numba is not installed; falling back to the numpy kernels")
        return "numpy"
    return requested
