"""Pure-numpy versions of the compiled loops in ``_numba_kernels``.

Results agree with the compiled path to round-off; the convolutions go through
BLAS, so their summation order is not the ascending order of the loop kernels.
Ghost layers are materialized with ``np.pad`` (two zero cells per side).
"""

from __future__ import annotations

import numpy as np

GHOST = 2
TINY = np.finfo(np.float64).tiny


def _flux(v, ul, ur):
    return np.maximum(v, 0.0) * ul + np.minimum(v, 0.0) * ur


def upwind1d(u, v, dx):
    n = u.shape[0]
    up = np.pad(u, GHOST)
    f = _flux(v, up[GHOST - 1 : n + GHOST], up[GHOST : n + GHOST + 1])
    return -(f[1:] - f[:-1]) / dx


def upwind2d(u, vx, vy, dx, dy):
    nx, ny = u.shape
    up = np.pad(u, GHOST)
    inner_y = slice(GHOST, ny + GHOST)
    inner_x = slice(GHOST, nx + GHOST)
    fx = _flux(vx, up[GHOST - 1 : nx + GHOST, inner_y], up[GHOST : nx + GHOST + 1, inner_y])
    fy = _flux(vy, up[inner_x, GHOST - 1 : ny + GHOST], up[inner_x, GHOST : ny + GHOST + 1])
    return -(fx[1:, :] - fx[:-1, :]) / dx - (fy[:, 1:] - fy[:, :-1]) / dy


def laplacian1d(u, dx):
    n = u.shape[0]
    up = np.pad(u, GHOST)
    return (up[GHOST - 1 : n + GHOST - 1] - 2.0 * u + up[GHOST + 1 : n + GHOST + 1]) / (dx * dx)


def laplacian2d(u, dx, dy):
    nx, ny = u.shape
    up = np.pad(u, GHOST)
    c = 2.0 * u
    xs = up[GHOST - 1 : nx + GHOST - 1, GHOST : ny + GHOST]
    xe = up[GHOST + 1 : nx + GHOST + 1, GHOST : ny + GHOST]
    ys = up[GHOST : nx + GHOST, GHOST - 1 : ny + GHOST - 1]
    ye = up[GHOST : nx + GHOST, GHOST + 1 : ny + GHOST + 1]
    return (xs - c + xe) / (dx * dx) + (ys - c + ye) / (dy * dy)


def plan_conv1d(table, off, n_src, n_tgt):
    # dense Toeplitz matrix: G[i, j] = table[i - j + off]
    idx = np.subtract.outer(np.arange(n_tgt), np.arange(n_src)) + off
    return np.ascontiguousarray(np.asarray(table, dtype=np.float64)[idx])


def _drop_subnormal(u):
    return np.where(np.abs(u) >= TINY, u, 0.0)


def apply_conv1d(plan, u, measure):
    return (plan @ _drop_subnormal(u)) * measure


def plan_conv2d(table, offx, offy, src_shape, tgt_shape):
    nx, ny = src_shape
    ntx, nty = tgt_shape
    table = np.asarray(table, dtype=np.float64)
    ix = np.subtract.outer(np.arange(ntx), np.arange(nx)) + offx
    shifts = np.arange(-(ny - 1), nty)
    # one Toeplitz block along x per column shift b = k - l
    blocks = np.stack([table[ix, b + offy] for b in shifts])
    return blocks, shifts, nty


def apply_conv2d(plan, u, measure):
    blocks, shifts, nty = plan
    u = _drop_subnormal(u)
    ny = u.shape[1]
    out = np.zeros((blocks.shape[1], nty))
    for g, b in zip(blocks, shifts):
        k0 = max(0, b)
        k1 = min(nty, ny + b)
        if k1 <= k0:
            continue
        out[:, k0:k1] += g @ u[:, k0 - b : k1 - b]
    return out * measure
