"""Kernel backend selection.

The three correlation primitives (forward, input gradient, weight
gradient) exist twice: numba-jitted loops and a pure-numpy fallback.
``HAZELIFT_BACKEND`` selects one of ``auto`` (default: numba when
importable), ``numba`` or ``numpy``. Both backends implement identical
math; summation order differs, so cross-backend results agree only to
float tolerance.
"""

from __future__ import annotations

import os

from . import kernels_numpy

_CHOICES = ("auto", "numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get("HAZELIFT_BACKEND", "auto").strip().lower() or "auto"
    if requested not in _CHOICES:
        raise ValueError(
            f"HAZELIFT_BACKEND must be one of {_CHOICES}, got {requested!r}"
        )
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


_ACTIVE = _resolve()

if _ACTIVE == "numba":
    from . import kernels_numba as _impl
else:
    _impl = kernels_numpy

corr_fwd = _impl.corr_fwd
corr_bwd_input = _impl.corr_bwd_input
corr_bwd_weight = _impl.corr_bwd_weight


def active_backend() -> str:
    """Name of the kernel backend in use: 'numba' or 'numpy'."""
    return _ACTIVE


def set_num_threads(n: int) -> None:
    """Limit kernel parallelism. No-op on the numpy backend."""
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if _ACTIVE == "numba":
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
