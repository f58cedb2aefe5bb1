"""Kernel backend selection.

``GRAPHACL_BACKEND=numpy`` forces the pure-numpy path; the default is numba
when it imports cleanly. Both backends expose the same functions.
"""
import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

_requested = os.environ.get("GRAPHACL_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"GRAPHACL_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba" and numba_backend is not None:
    _impl = numba_backend
    BACKEND = "numba"
else:
    _impl = numpy_backend
    BACKEND = "numpy"

spmm = _impl.spmm
spmm_t = _impl.spmm_t
edge_dots = _impl.edge_dots
gather_dots = _impl.gather_dots
gather_backward = _impl.gather_backward
two_hop = _impl.two_hop

__all__ = [
    "BACKEND",
    "numpy_backend",
    "numba_backend",
    "spmm",
    "spmm_t",
    "edge_dots",
    "gather_dots",
    "gather_backward",
    "two_hop",
]
