"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``DCONE_LAB_BACKEND``
(``numba`` by default, ``numpy`` to bypass JIT compilation). Both modules
expose the same functions and are also importable directly for
cross-checking.
"""
import logging
import os

from . import _numpy as numpy_backend

logger = logging.getLogger(__name__)

BACKEND = os.environ.get("DCONE_LAB_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"DCONE_LAB_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        from . import _numba as numba_backend
    except ImportError:  # pragma: no cover - numba missing
        logger.warning("numba unavailable, falling back to numpy kernels")
        BACKEND = "numpy"
        numba_backend = None
else:
    numba_backend = None

_active = numba_backend if BACKEND == "numba" else numpy_backend

polar_partials = _active.polar_partials
polar_partials_adjoint = _active.polar_partials_adjoint
energy_and_gradient = _active.energy_and_gradient
winding_sums = _active.winding_sums
polyline_distances = _active.polyline_distances
cartesian = numpy_backend.cartesian
cartesian_adjoint = numpy_backend.cartesian_adjoint

__all__ = [
    "BACKEND",
    "polar_partials",
    "polar_partials_adjoint",
    "energy_and_gradient",
    "winding_sums",
    "polyline_distances",
    "cartesian",
    "cartesian_adjoint",
]
