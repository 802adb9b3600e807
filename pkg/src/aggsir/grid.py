"""Uniform finite-volume meshes on intervals and rectangles.

Cells outside the mesh hold density zero (two ghost layers per side in the
flux and Laplacian stencils).  Coordinates are always formed as ``lo + k*dx``,
never by accumulation, so they are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidBounds, NonFiniteSample, ShapeMismatch, TooFewCells

MIN_CELLS = 4
GHOST_LAYERS = 2
_CLAMP = 1e-14


def _as_tuple(value, cast) -> tuple:
    if np.ndim(value) == 0:
        return (cast(value),)
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class Grid:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((h - l) / k for l, h, k in zip(self.lo, self.hi, self.n))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.dx))

    @property
    def measure(self) -> float:
        return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def centers(self, axis: int = 0) -> np.ndarray:
        return self.lo[axis] + (np.arange(self.n[axis]) + 0.5) * self.dx[axis]

    def interfaces(self, axis: int = 0) -> np.ndarray:
        return self.lo[axis] + np.arange(self.n[axis] + 1) * self.dx[axis]

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays broadcast to ``shape`` (``ij`` indexing)."""
        return tuple(np.meshgrid(*(self.centers(a) for a in range(self.dim)), indexing="ij"))


def build_grid(lo, hi, n) -> Grid:
    """Build a uniform grid. Scalars give a 1D grid, length-2 sequences a 2D one."""
    lo_t = _as_tuple(lo, float)
    hi_t = _as_tuple(hi, float)
    n_t = _as_tuple(n, int)
    if not (len(lo_t) == len(hi_t) == len(n_t)) or len(n_t) not in (1, 2):
        raise InvalidBounds(f"grid must be 1D or 2D with matching lo/hi/n, got {lo!r}, {hi!r}, {n!r}")
    for l, h in zip(lo_t, hi_t):
        if not (np.isfinite(l) and np.isfinite(h)) or h <= l:
            raise InvalidBounds(f"need finite hi > lo on every axis, got lo={l}, hi={h}")
    for k in n_t:
        if k < MIN_CELLS:
            raise TooFewCells(f"need at least {MIN_CELLS} cells per axis, got {k}")
    return Grid(lo_t, hi_t, n_t)


@dataclass
class Field:
    """Cell averages of one density on ``grid``; ``values`` has shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            if self.values.size == self.grid.size:
                self.values = self.values.reshape(self.grid.shape)
            else:
                raise ShapeMismatch(f"field of shape {self.values.shape} on grid of shape {self.grid.shape}")

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))


def _sample(grid: Grid, f: Callable) -> np.ndarray:
    coords = grid.mesh()
    try:
        out = np.asarray(f(*coords), dtype=np.float64)
        if out.shape != grid.shape:
            out = np.broadcast_to(out, grid.shape).copy()
    except (TypeError, ValueError):
        out = np.vectorize(lambda *p: float(f(*p)), otypes=[np.float64])(*coords)
    return out


def project_function(grid: Grid, f: Callable) -> Field:
    """Midpoint projection: each cell takes ``f`` at its center.

    ``f`` receives one coordinate array per axis. Scalar-only callables are
    vectorized automatically.
    """
    values = _sample(grid, f)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteSample(f"non-finite sample at cell {tuple(int(b) for b in bad)}")
    tiny = (values < 0) & (values >= -_CLAMP)
    values[tiny] = 0.0
    return Field(grid, values)


def indicator(lo: Sequence[float] | float, hi: Sequence[float] | float, value: float = 1.0) -> Callable:
    """Pointwise ``value`` on the closed box [lo, hi], zero elsewhere."""
    lo_a = np.atleast_1d(np.asarray(lo, dtype=float))
    hi_a = np.atleast_1d(np.asarray(hi, dtype=float))

    def f(*x):
        inside = np.ones(np.shape(x[0]), dtype=bool)
        for a, xa in enumerate(x):
            inside &= (xa >= lo_a[a]) & (xa <= hi_a[a])
        return np.where(inside, value, 0.0)

    return f


def average_indicator(grid: Grid, lo, hi, value: float = 1.0) -> Field:
    """Exact cell averages of ``value * 1_[lo, hi]`` (overlap length per cell)."""
    lo_a = np.atleast_1d(np.asarray(lo, dtype=float))
    hi_a = np.atleast_1d(np.asarray(hi, dtype=float))
    frac = []
    for a in range(grid.dim):
        edges = grid.interfaces(a)
        overlap = np.clip(np.minimum(edges[1:], hi_a[a]) - np.maximum(edges[:-1], lo_a[a]), 0.0, None)
        frac.append(overlap / grid.dx[a])
    values = frac[0] if grid.dim == 1 else np.multiply.outer(frac[0], frac[1])
    return Field(grid, value * values)
