"""Acceleration switch for the hot numeric kernels.

The field arithmetic and the Path ORAM inner loop are the only parts of the
simulator where Python-level overhead matters.  By default they run as numba
``@njit`` kernels; setting the environment variable ``SCATTERMEM_NO_NUMBA=1``
(or any non-empty value other than ``0``) selects the pure numpy/Python
fallback instead.  The fallback computes bit-identical results, it is just
slower; ``benchmarks/bench_kernels.py`` measures the gap.
"""

import os

_flag = os.environ.get("SCATTERMEM_NO_NUMBA", "").strip()
NUMBA_REQUESTED = not (_flag and _flag != "0")

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

USE_NUMBA = NUMBA_REQUESTED and HAVE_NUMBA


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
