"""Selects the numeric kernel backend.

Hot kernels (autodiff sweeps, MLP channel propagation) are written in
nopython-compatible style and compiled with numba by default. Setting the
environment variable ``THMPINN_BACKEND=numpy`` skips compilation and runs
the same functions as plain Python/numpy; ``THMPINN_BACKEND=numba`` forces
compilation (raises if numba is unavailable). ``benchmarks/bench_kernels.py``
compares the two.
"""
import os

_requested = os.environ.get("THMPINN_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"THMPINN_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    USE_NUMBA = False
else:
    try:
        from numba import njit as _njit

        USE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile `func` with numba when enabled, otherwise return it as-is."""
    if USE_NUMBA:
        return _njit(cache=True)(func)
    return func
