"""Interaction potentials, their gradients, and the discrete convolutions that
turn compartment densities into drift velocities.

A velocity sample at a target point ``p`` is the midpoint quadrature

    (grad W * u)(p) ~= sum_j grad W(p - x_j) u_j |cell|

taken over the cells of the grid (zero density outside).  ``p - x_j`` depends
only on the index difference, so each kernel is tabulated once per grid on the
offset lattice and the sum runs directly over that table.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _hot
from .errors import DimensionMismatch, OffsetNotTabulated, ShapeMismatch, UnknownCompartment
from .grid import Field, Grid

TARGETS = ("interfaces", "centers")


# --------------------------------------------------------------------------- specs


@dataclass(frozen=True)
class Zero:
    dims = (1, 2)

    def key(self):
        return ("zero",)

    def potential(self, x):
        return np.zeros(np.shape(x)[:-1]) if np.ndim(x) > 1 else np.zeros(np.shape(x))

    def grad(self, x):
        return np.zeros(np.shape(x), dtype=np.float64)


@dataclass(frozen=True)
class QuadAbs:
    """W(x) = x**2 - gamma*|x| on the line: repulsive for |x| < gamma/2, attractive beyond."""

    gamma: float
    dims = (1,)

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"QuadAbs needs gamma > 0, got {self.gamma}")

    def key(self):
        return ("quadabs", float(self.gamma))

    def potential(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x * x - self.gamma * np.abs(x)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        # np.sign(0) == 0, so W'(0) = 0
        return 2.0 * x - self.gamma * np.sign(x)


@dataclass(frozen=True)
class Gaussian:
    """W(x) = -A exp(-|x|^2 / 2 sigma^2) when attractive, +A exp(...) when repulsive.

    Points are arrays of shape ``(..., d)`` in 2D; plain arrays in 1D.
    """

    amplitude: float
    sigma: float
    attractive: bool = True
    dims = (1, 2)

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"Gaussian needs sigma > 0, got {self.sigma}")
        if not np.isfinite(self.amplitude):
            raise ValueError("Gaussian amplitude must be finite")

    @property
    def _signed_amplitude(self) -> float:
        return -self.amplitude if self.attractive else self.amplitude

    def key(self):
        return ("gaussian", float(self.amplitude), float(self.sigma), bool(self.attractive))

    def potential(self, x, dim=1):
        x = np.asarray(x, dtype=np.float64)
        r2 = x * x if dim == 1 else np.sum(x * x, axis=-1)
        return self._signed_amplitude * np.exp(-r2 / (2.0 * self.sigma**2))

    def grad(self, x, dim=1):
        x = np.asarray(x, dtype=np.float64)
        s2 = self.sigma**2
        if dim == 1:
            return -self._signed_amplitude * x / s2 * np.exp(-x * x / (2.0 * s2))
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return -self._signed_amplitude * x / s2 * np.exp(-r2 / (2.0 * s2))


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Gradient samples on a uniform offset lattice.

    ``offsets`` has shape (m,) in 1D or (m, 2) in 2D, ``grad_samples`` the same
    shape.  Offsets outside the table's bounding box have zero gradient;
    offsets inside it but off the lattice raise ``OffsetNotTabulated``.
    """

    offsets: np.ndarray
    grad_samples: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.float64)
        g = np.asarray(self.grad_samples, dtype=np.float64)
        if off.shape != g.shape or off.ndim not in (1, 2) or (off.ndim == 2 and off.shape[1] != 2):
            raise ShapeMismatch(f"offsets {off.shape} and gradients {g.shape} must both be (m,) or (m, 2)")
        off2 = off.reshape(len(off), -1)
        steps, origin = [], []
        for a in range(off2.shape[1]):
            u = np.unique(off2[:, a])
            d = np.diff(u)
            steps.append(float(d.min()) if len(d) else 1.0)
            origin.append(float(u[0]))
        steps_a = np.array(steps)
        origin_a = np.array(origin)
        idx = np.rint((off2 - origin_a) / steps_a).astype(np.int64)
        if np.any(np.abs(off2 - (origin_a + idx * steps_a)) > 1e-6 * steps_a):
            raise OffsetNotTabulated("tabulated offsets do not lie on a uniform lattice")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "grad_samples", g)
        object.__setattr__(
            self,
            "_index",
            {
                "steps": steps_a,
                "origin": origin_a,
                "lo": off2.min(axis=0),
                "hi": off2.max(axis=0),
                "map": {tuple(i): k for k, i in enumerate(idx.tolist())},
            },
        )

    @property
    def dims(self):
        return (1,) if self.offsets.ndim == 1 else (2,)

    def key(self):
        return ("tabulated", self.offsets.tobytes(), self.grad_samples.tobytes())

    def __eq__(self, other):
        return isinstance(other, Tabulated) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def grad(self, x, dim=1):
        x = np.asarray(x, dtype=np.float64)
        info = self._index
        pts = x.reshape(-1, 1) if dim == 1 else x.reshape(-1, 2)
        g2 = self.grad_samples.reshape(len(self.grad_samples), -1)
        out = np.zeros_like(pts)
        steps, origin = info["steps"], info["origin"]
        tol = 1e-6 * steps
        inside = np.all((pts >= info["lo"] - tol) & (pts <= info["hi"] + tol), axis=1)
        idx = np.rint((pts - origin) / steps).astype(np.int64)
        for r in np.flatnonzero(inside):
            k = info["map"].get(tuple(idx[r]))
            if k is None or np.any(np.abs(pts[r] - (origin + idx[r] * steps)) > tol):
                raise OffsetNotTabulated(f"offset {pts[r].tolist()} is not in the table")
            out[r] = g2[k]
        return out.reshape(x.shape)

    def is_odd_symmetric(self, rtol: float = 1e-12) -> bool:
        """Table inspection: every offset o has -o in the table with gradient -g."""
        try:
            mirrored = self.grad(-self.offsets, dim=2 if self.offsets.ndim == 2 else 1)
        except OffsetNotTabulated:
            return False
        scale = max(float(np.max(np.abs(self.grad_samples), initial=0.0)), 1e-300)
        return bool(np.all(np.abs(mirrored + self.grad_samples) <= rtol * scale))


KernelSpec = Zero | QuadAbs | Gaussian | Tabulated


def load_tabulated(path: str | Path) -> Tabulated:
    """Read a tabulated kernel: columns ``offset,grad`` or ``dx,dy,gradx,grady``.

    A non-numeric first row is treated as a header.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells or cells[0].startswith("#"):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if rows:
                    raise ValueError(f"{path}:{lineno}: non-numeric row {row!r}") from None
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] not in (2, 4):
        raise ValueError(f"{path}: expected 2 or 4 numeric columns")
    if arr.shape[1] == 2:
        return Tabulated(arr[:, 0], arr[:, 1])
    return Tabulated(arr[:, :2], arr[:, 2:])


def _spec_dim_check(spec, dim: int) -> None:
    if dim not in spec.dims:
        raise DimensionMismatch(f"{type(spec).__name__} kernel does not support {dim}D positions")


def eval_gradient(spec: KernelSpec, x):
    """Exact gradient of the potential at a single position.

    A scalar (or length-1 vector) position is 1D and returns a float; a
    length-2 vector returns an array of two components.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x_arr)):
        raise ValueError("position must be finite")
    dim = 1 if x_arr.size == 1 else x_arr.size
    if dim not in (1, 2):
        raise DimensionMismatch(f"positions must be 1D or 2D, got {x_arr.size} components")
    _spec_dim_check(spec, dim)
    if dim == 1:
        return float(_grad(spec, x_arr.reshape(()), 1))
    return _grad(spec, x_arr.reshape(2), 2)


def _grad(spec, pts, dim):
    if isinstance(spec, (Gaussian, Tabulated)):
        return spec.grad(pts, dim=dim)
    return spec.grad(pts)


# --------------------------------------------------------------------------- convolution


class ConvolutionPlan:
    """Offset tables of one kernel on one grid, ready for repeated application."""

    def __init__(self, grid: Grid, spec: KernelSpec, targets: str = "interfaces"):
        if targets not in TARGETS:
            raise ValueError(f"targets must be one of {TARGETS}, got {targets!r}")
        _spec_dim_check(spec, grid.dim)
        self.grid = grid
        self.spec = spec
        self.targets = targets
        self.is_zero = isinstance(spec, Zero)
        self._plans = [] if self.is_zero else self._build()

    def _build(self):
        g = self.grid
        if g.dim == 1:
            (n,) = g.n
            (dx,) = g.dx
            nt = n + 1 if self.targets == "interfaces" else n
            shift = -0.5 if self.targets == "interfaces" else 0.0
            k = np.arange(-(n - 1), nt)
            table = _grad(self.spec, (k + shift) * dx, 1)
            return [_hot.plan_conv1d(table, n - 1, n, nt)]
        nx, ny = g.n
        dx, dy = g.dx
        plans = []
        for axis in (0, 1):
            half = self.targets == "interfaces"
            ntx = nx + 1 if half and axis == 0 else nx
            nty = ny + 1 if half and axis == 1 else ny
            ax = np.arange(-(nx - 1), ntx) + (-0.5 if half and axis == 0 else 0.0)
            by = np.arange(-(ny - 1), nty) + (-0.5 if half and axis == 1 else 0.0)
            pts = np.stack(np.meshgrid(ax * dx, by * dy, indexing="ij"), axis=-1)
            table = _grad(self.spec, pts, 2)[..., axis]
            plans.append(_hot.plan_conv2d(table, nx - 1, ny - 1, (nx, ny), (ntx, nty)))
        return plans

    def target_shapes(self) -> list[tuple[int, ...]]:
        g = self.grid
        if g.dim == 1:
            return [(g.n[0] + 1,) if self.targets == "interfaces" else g.n]
        nx, ny = g.n
        if self.targets == "interfaces":
            return [(nx + 1, ny), (nx, ny + 1)]
        return [(nx, ny), (nx, ny)]

    def apply(self, u: np.ndarray) -> list[np.ndarray]:
        """One sample array per axis (a single-element list in 1D)."""
        if u.shape != self.grid.shape:
            raise ShapeMismatch(f"density of shape {u.shape} on grid of shape {self.grid.shape}")
        if self.is_zero:
            return [np.zeros(s) for s in self.target_shapes()]
        u = np.ascontiguousarray(u, dtype=np.float64)
        m = self.grid.cell_measure
        if self.grid.dim == 1:
            return [_hot.apply_conv1d(self._plans[0], u, m)]
        return [_hot.apply_conv2d(p, u, m) for p in self._plans]


def _unpack(samples: list[np.ndarray], grid: Grid, targets: str):
    if grid.dim == 1:
        return samples[0]
    if targets == "centers":
        return np.stack(samples)
    return tuple(samples)


def convolve_gradient(grid: Grid, density: Field | np.ndarray, spec: KernelSpec, targets: str = "interfaces"):
    """Midpoint-quadrature samples of ``grad W * density``.

    In 1D returns one array (``n + 1`` interface samples or ``n`` center
    samples).  In 2D, interface targets give a tuple ``(x-component at
    x-interfaces, y-component at y-interfaces)`` and center targets an array of
    shape ``(2, nx, ny)``.
    """
    values = density.values if isinstance(density, Field) else np.asarray(density, dtype=np.float64)
    if isinstance(density, Field) and density.grid != grid:
        raise DimensionMismatch("density lives on a different grid")
    if values.ndim != grid.dim:
        raise DimensionMismatch(f"{values.ndim}D density on a {grid.dim}D grid")
    plan = ConvolutionPlan(grid, spec, targets)
    return _unpack(plan.apply(values), grid, targets)


# --------------------------------------------------------------------------- kernel matrix


@dataclass(frozen=True)
class KernelMatrix:
    compartments: tuple[str, ...]
    entries: Mapping[tuple[str, str], KernelSpec]
    shared: bool = False

    def __post_init__(self):
        names = tuple(self.compartments)
        if len(set(names)) != len(names) or not names:
            raise ValueError(f"compartment names must be unique and non-empty, got {names}")
        missing = [(a, b) for a in names for b in names if (a, b) not in self.entries]
        if missing:
            raise ValueError(f"kernel matrix is missing pairs {missing}")
        extra = [k for k in self.entries if k[0] not in names or k[1] not in names]
        if extra:
            raise UnknownCompartment(f"kernel entries for unknown compartments {extra}")
        object.__setattr__(self, "compartments", names)
        object.__setattr__(self, "entries", dict(self.entries))
        if self.shared and len({self.entries[k].key() for k in self.entries}) != 1:
            raise ValueError("shared flag set but entries differ")

    @classmethod
    def shared_kernel(cls, compartments: Sequence[str], spec: KernelSpec) -> "KernelMatrix":
        names = tuple(compartments)
        return cls(names, {(a, b): spec for a in names for b in names}, shared=True)

    @classmethod
    def from_pairs(
        cls, compartments: Sequence[str], pairs: Mapping[tuple[str, str], KernelSpec], default: KernelSpec | None = None
    ) -> "KernelMatrix":
        names = tuple(compartments)
        default = Zero() if default is None else default
        entries = {(a, b): pairs.get((a, b), default) for a in names for b in names}
        unknown = set(pairs) - set(entries)
        if unknown:
            raise UnknownCompartment(f"kernel entries for unknown compartments {sorted(unknown)}")
        same = len({s.key() for s in entries.values()}) == 1
        return cls(names, entries, shared=same)

    def __getitem__(self, pair: tuple[str, str]) -> KernelSpec:
        return self.entries[pair]

    def index(self, name: str) -> int:
        try:
            return self.compartments.index(name)
        except ValueError:
            raise UnknownCompartment(f"unknown compartment {name!r}") from None


class VelocityAssembler:
    """Computes ``-sum_eta grad W[xi, eta] * u_eta`` for every compartment.

    Densities that share a kernel within one row are summed before convolving,
    and identical (kernel, density-group) terms are evaluated once per call.
    """

    def __init__(self, grid: Grid, km: KernelMatrix, targets: str = "interfaces"):
        self.grid = grid
        self.km = km
        self.targets = targets
        plans: dict = {}
        self.rows = []
        names = km.compartments
        for xi in names:
            groups: dict = {}
            for e, eta in enumerate(names):
                spec = km[(xi, eta)]
                if isinstance(spec, Zero):
                    continue
                groups.setdefault(spec.key(), (spec, []))[1].append(e)
            row = []
            for key, (spec, members) in groups.items():
                if key not in plans:
                    plans[key] = ConvolutionPlan(grid, spec, targets)
                row.append((key, plans[key], tuple(members)))
            self.rows.append(row)
        self._shapes = ConvolutionPlan(grid, Zero(), targets).target_shapes()

    def __call__(self, data: np.ndarray) -> list[list[np.ndarray]]:
        cache: dict = {}
        out = []
        for row in self.rows:
            total = [np.zeros(s) for s in self._shapes]
            for key, plan, members in row:
                ck = (key, members)
                if ck not in cache:
                    dens = data[members[0]] if len(members) == 1 else np.sum(data[list(members)], axis=0)
                    cache[ck] = plan.apply(dens)
                for a, s in enumerate(cache[ck]):
                    total[a] -= s
            out.append(total)
        return out


def velocity_for_compartment(grid: Grid, state, km: KernelMatrix, xi: int | str, targets: str = "interfaces"):
    """Drift velocity of one compartment, in the layout of ``convolve_gradient``."""
    names = tuple(state.names)
    if names != km.compartments:
        raise UnknownCompartment(f"state compartments {names} do not match kernel matrix {km.compartments}")
    if isinstance(xi, str):
        xi = km.index(xi)
    if not 0 <= xi < len(names):
        raise UnknownCompartment(f"compartment index {xi} out of range")
    data = np.asarray(state.data, dtype=np.float64)
    vel = VelocityAssembler(grid, km, targets)(data)[xi]
    return _unpack(vel, grid, targets)
