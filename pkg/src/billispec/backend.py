"""Kernel backend selection.

The hot numeric loops (billiard orbit iteration, Bessel tables, compensated
sums) live in _kernels_numba (default) with a pure-numpy twin in
_kernels_numpy. Set BILLISPEC_BACKEND=numpy to force the fallback, or
BILLISPEC_BACKEND=numba to require the compiled path. BILLISPEC_THREADS caps
the numba thread count.
"""
import os
import warnings

_CHOICE = os.environ.get("BILLISPEC_BACKEND", "auto").strip().lower()

if _CHOICE not in ("auto", "numba", "numpy", ""):
    raise ValueError(f"BILLISPEC_BACKEND must be auto|numba|numpy, got {_CHOICE!r}")

if _CHOICE == "numpy":
    from . import _kernels_numpy as kernels
    _NAME = "numpy"
else:
    try:
        import numba  # noqa: F401
        threads = os.environ.get("BILLISPEC_THREADS")
        if threads:
            numba.set_num_threads(max(1, int(threads)))
        from . import _kernels_numba as kernels
        _NAME = "numba"
    except ImportError:
        if _CHOICE == "numba":
            raise
        warnings.warn("numba unavailable; falling back to numpy kernels")
        from . import _kernels_numpy as kernels
        _NAME = "numpy"


def backend_name():
    return _NAME
