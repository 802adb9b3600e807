"""Dispatch point for the hot kernels (compiled or numpy, see ``_backend``)."""

from __future__ import annotations

from ._backend import USE_NUMBA

if USE_NUMBA:
    from ._numba_kernels import (
        apply_conv1d,
        apply_conv2d,
        laplacian1d,
        laplacian2d,
        plan_conv1d,
        plan_conv2d,
        upwind1d,
        upwind2d,
    )
else:
    from ._numpy_kernels import (
        apply_conv1d,
        apply_conv2d,
        laplacian1d,
        laplacian2d,
        plan_conv1d,
        plan_conv2d,
        upwind1d,
        upwind2d,
    )

__all__ = [
    "apply_conv1d",
    "apply_conv2d",
    "laplacian1d",
    "laplacian2d",
    "plan_conv1d",
    "plan_conv2d",
    "upwind1d",
    "upwind2d",
]
