"""Compiled inner loops.

Every function here has a twin of identical signature in ``_numpy_kernels``.
Convolution sums run over source cells in ascending (row-major) index order.
Cells below the smallest normal double are skipped: exact zeros change
nothing, and subnormal tails (left behind by long runs) would otherwise slow
every multiply they touch by an order of magnitude while contributing at most
``n * max|table| * 2.2e-308`` to the result.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._backend import numba_default

TINY = np.finfo(np.float64).tiny


@njit(**numba_default)
def _nonzero_1d(u):
    idx = np.empty(u.shape[0], dtype=np.int64)
    cnt = 0
    for j in range(u.shape[0]):
        if abs(u[j]) >= TINY:
            idx[cnt] = j
            cnt += 1
    return idx[:cnt]


@njit(**numba_default)
def _conv1d(table, off, u, measure, nt):
    out = np.zeros(nt)
    src = _nonzero_1d(u)
    ns = src.shape[0]
    if ns == 0:
        return out
    for i in range(nt):
        acc = 0.0
        base = i + off
        for m in range(ns):
            j = src[m]
            acc += table[base - j] * u[j]
        out[i] = acc * measure
    return out


@njit(**numba_default)
def _conv2d(table, offx, offy, u, measure, ntx, nty):
    nx, ny = u.shape
    js = np.empty(nx * ny, dtype=np.int64)
    ls = np.empty(nx * ny, dtype=np.int64)
    vals = np.empty(nx * ny)
    cnt = 0
    for j in range(nx):
        for l in range(ny):
            if abs(u[j, l]) >= TINY:
                js[cnt] = j
                ls[cnt] = l
                vals[cnt] = u[j, l]
                cnt += 1
    out = np.zeros((ntx, nty))
    if cnt == 0:
        return out
    for i in range(ntx):
        for k in range(nty):
            acc = 0.0
            for m in range(cnt):
                acc += table[i - js[m] + offx, k - ls[m] + offy] * vals[m]
            out[i, k] = acc * measure
    return out


@njit(**numba_default)
def _flux(vi, ul, ur):
    return max(vi, 0.0) * ul + min(vi, 0.0) * ur


@njit(**numba_default)
def upwind1d(u, v, dx):
    n = u.shape[0]
    out = np.empty(n)
    fprev = _flux(v[0], 0.0, u[0])
    for j in range(n):
        ur = u[j + 1] if j + 1 < n else 0.0
        fnext = _flux(v[j + 1], u[j], ur)
        out[j] = -(fnext - fprev) / dx
        fprev = fnext
    return out


@njit(**numba_default)
def upwind2d(u, vx, vy, dx, dy):
    nx, ny = u.shape
    fx = np.empty((nx + 1, ny))
    fy = np.empty((nx, ny + 1))
    for i in range(nx + 1):
        for k in range(ny):
            ul = u[i - 1, k] if i > 0 else 0.0
            ur = u[i, k] if i < nx else 0.0
            fx[i, k] = _flux(vx[i, k], ul, ur)
    for i in range(nx):
        for k in range(ny + 1):
            ul = u[i, k - 1] if k > 0 else 0.0
            ur = u[i, k] if k < ny else 0.0
            fy[i, k] = _flux(vy[i, k], ul, ur)
    out = np.empty((nx, ny))
    for i in range(nx):
        for k in range(ny):
            out[i, k] = -(fx[i + 1, k] - fx[i, k]) / dx - (fy[i, k + 1] - fy[i, k]) / dy
    return out


@njit(**numba_default)
def laplacian1d(u, dx):
    n = u.shape[0]
    out = np.empty(n)
    h2 = dx * dx
    for j in range(n):
        ul = u[j - 1] if j > 0 else 0.0
        ur = u[j + 1] if j + 1 < n else 0.0
        out[j] = (ul - 2.0 * u[j] + ur) / h2
    return out


@njit(**numba_default)
def laplacian2d(u, dx, dy):
    nx, ny = u.shape
    out = np.empty((nx, ny))
    hx2 = dx * dx
    hy2 = dy * dy
    for i in range(nx):
        for k in range(ny):
            c = 2.0 * u[i, k]
            xl = u[i - 1, k] if i > 0 else 0.0
            xr = u[i + 1, k] if i + 1 < nx else 0.0
            yl = u[i, k - 1] if k > 0 else 0.0
            yr = u[i, k + 1] if k + 1 < ny else 0.0
            out[i, k] = (xl - c + xr) / hx2 + (yl - c + yr) / hy2
    return out


def plan_conv1d(table, off, n_src, n_tgt):
    return (np.ascontiguousarray(table, dtype=np.float64), int(off), int(n_tgt))


def apply_conv1d(plan, u, measure):
    table, off, nt = plan
    return _conv1d(table, off, u, float(measure), nt)


def plan_conv2d(table, offx, offy, src_shape, tgt_shape):
    return (
        np.ascontiguousarray(table, dtype=np.float64),
        int(offx),
        int(offy),
        int(tgt_shape[0]),
        int(tgt_shape[1]),
    )


def apply_conv2d(plan, u, measure):
    table, offx, offy, ntx, nty = plan
    return _conv2d(table, offx, offy, u, float(measure), ntx, nty)
