"""Dispatch layer exposing the active GF(2^64) batch kernels.

``from scattermem import kernels`` gives the accelerated implementations when
numba is enabled and the numpy/Python fallback otherwise (see ``_accel``).
Both backends produce identical integer results.
"""

from . import _accel
from . import _gf_numpy

if _accel.USE_NUMBA:
    from . import _gf_numba as _impl
else:
    _impl = _gf_numpy

BACKEND = _accel.backend_name()

mul_vec = _impl.mul_vec
inv_vec = _impl.inv_vec
poly_eval_many = _impl.poly_eval_many
eval_one = _impl.eval_one
lagrange_coefficients = _impl.lagrange_coefficients
barycentric_weights = _impl.barycentric_weights
barycentric_eval = _impl.barycentric_eval

# Always-available references, used by the equivalence tests and benchmark.
numpy_impl = _gf_numpy


def numba_impl():
    """Import and return the numba backend (raises if numba is missing)."""
    from . import _gf_numba
    return _gf_numba
