"""Method-of-lines time integration.

Spatial operator per compartment, evaluated in this order:

* upwind transport with interface velocities from the kernel convolutions,
* centered Laplacian times epsilon (skipped when epsilon == 0),
* pointwise reactions.

Time stepping uses strong-stability-preserving Runge-Kutta (Heun by default),
so each stage is a convex combination of forward-Euler steps and inherits
their positivity under the CFL bound.
"""

from __future__ import annotations

import math
import time as _time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _hot
from ._backend import backend_name
from .errors import CFLViolation, NonFiniteState, ShapeMismatch, SizeMismatch, SolverAbort
from .grid import Field, Grid
from .kernels import VelocityAssembler
from .models import ModelSpec, reaction_rates

_TINY = 1e-300
RK_METHODS = ("ssp2", "ssp3")


@dataclass
class State:
    """Densities of all compartments at one instant.

    ``data`` has shape ``(k, *grid.shape)``, one row per compartment.
    """

    grid: Grid
    names: tuple[str, ...]
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.names = tuple(self.names)
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (len(self.names), *self.grid.shape):
            raise ShapeMismatch(
                f"state data of shape {self.data.shape} for {len(self.names)} compartments on grid {self.grid.shape}"
            )

    @classmethod
    def from_fields(cls, names: Sequence[str], fields: Sequence[Field], time: float = 0.0) -> "State":
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ShapeMismatch("all fields must share one grid")
        return cls(grid, tuple(names), np.stack([f.values for f in fields]), time)

    @property
    def fields(self) -> tuple[Field, ...]:
        return tuple(Field(self.grid, row) for row in self.data)

    def field(self, name: str) -> Field:
        return Field(self.grid, self.data[self.names.index(name)])

    def total(self) -> np.ndarray:
        return self.data.sum(axis=0)

    def copy(self) -> "State":
        return State(self.grid, self.names, self.data.copy(), self.time)


@dataclass(frozen=True)
class SolverConfig:
    t_final: float
    dt: float | None = None
    cfl: float | None = None
    rk: str = "ssp2"
    snapshot_every: int = 1
    boundary: str = "zero"
    strict_cfl: bool = True
    cfl_limit: float = 0.5

    def __post_init__(self):
        if (self.dt is None) == (self.cfl is None):
            raise ValueError("set exactly one of dt and cfl")
        if not np.isfinite(self.t_final) or self.t_final < 0:
            raise ValueError(f"t_final must be finite and >= 0, got {self.t_final}")
        if self.dt is not None and not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.cfl is not None and not (0 < self.cfl <= 1):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (0 < self.cfl_limit <= 1):
            raise ValueError(f"cfl_limit must lie in (0, 1], got {self.cfl_limit}")
        if self.rk not in RK_METHODS:
            raise ValueError(f"rk must be one of {RK_METHODS}, got {self.rk!r}")
        if int(self.snapshot_every) < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.boundary != "zero":
            raise ValueError("only the zero-density ghost boundary is supported")


def cfl_timestep(grid: Grid, max_speed: float, epsilon: float, cfl: float) -> float:
    """Largest stable step: ``cfl / (v/dx + 2 d eps/dx^2)`` with the smallest dx.

    Returns a huge (finite) value when nothing moves; callers clamp it.
    """
    h = min(grid.dx)
    rate = max_speed / h + 2.0 * grid.dim * epsilon / (h * h)
    return cfl / (rate + _TINY)


def _as_array(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=np.float64)


def transport_rhs(grid: Grid, u, v) -> np.ndarray:
    """Conservative upwind divergence ``-(F[j+1/2] - F[j-1/2]) / dx``.

    ``v`` holds velocities at all ``n + 1`` interfaces (1D) or a pair of
    arrays for the x- and y-interfaces (2D).  Cells beyond the grid are zero.
    """
    u = _as_array(u)
    if u.shape != grid.shape:
        raise SizeMismatch(f"density shape {u.shape} does not match grid {grid.shape}")
    if grid.dim == 1:
        v = np.asarray(v[0] if isinstance(v, (list, tuple)) else v, dtype=np.float64)
        if v.shape != (grid.n[0] + 1,):
            raise SizeMismatch(f"need {grid.n[0] + 1} interface velocities, got {v.shape}")
        return _hot.upwind1d(np.ascontiguousarray(u), v, grid.dx[0])
    vx, vy = (np.asarray(a, dtype=np.float64) for a in v)
    nx, ny = grid.n
    if vx.shape != (nx + 1, ny) or vy.shape != (nx, ny + 1):
        raise SizeMismatch(f"interface velocity shapes {vx.shape}, {vy.shape} do not fit grid {grid.n}")
    return _hot.upwind2d(np.ascontiguousarray(u), vx, vy, grid.dx[0], grid.dx[1])


def diffusion_rhs(grid: Grid, u, epsilon: float) -> np.ndarray:
    u = _as_array(u)
    if epsilon == 0:
        return np.zeros(grid.shape)
    if grid.dim == 1:
        return epsilon * _hot.laplacian1d(np.ascontiguousarray(u), grid.dx[0])
    return epsilon * _hot.laplacian2d(np.ascontiguousarray(u), grid.dx[0], grid.dx[1])


class Discretization:
    """Spatial operator of one model on one grid (kernel tables built once)."""

    def __init__(self, model: ModelSpec, grid: Grid):
        self.model = model
        self.grid = grid
        self.velocities = VelocityAssembler(grid, model.kernel_matrix, "interfaces")

    def max_speed(self, vels) -> float:
        # 2D: |vx|max + |vy|max bounds the outflow through all four faces
        best = 0.0
        for per_axis in vels:
            s = sum(float(np.max(np.abs(a), initial=0.0)) for a in per_axis)
            best = max(best, s)
        return best

    def rhs(self, data: np.ndarray) -> tuple[np.ndarray, float]:
        grid, model = self.grid, self.model
        vels = self.velocities(data)
        out = np.empty_like(data)
        for k in range(data.shape[0]):
            out[k] = transport_rhs(grid, data[k], vels[k])
        if model.epsilon > 0:
            for k in range(data.shape[0]):
                out[k] += diffusion_rhs(grid, data[k], model.epsilon)
        out += reaction_rates(model, data)
        return out, self.max_speed(vels)


_DISC_CACHE: dict = {}


def _discretization(model: ModelSpec, grid: Grid) -> Discretization:
    key = (id(model), grid)
    hit = _DISC_CACHE.get(key)
    if hit is not None and hit.model is model:
        return hit
    if len(_DISC_CACHE) > 16:
        _DISC_CACHE.clear()
    disc = Discretization(model, grid)
    _DISC_CACHE[key] = disc
    return disc


def _check_state(model: ModelSpec, state: State) -> None:
    if state.names != model.compartments:
        raise ShapeMismatch(f"state compartments {state.names} do not match model {model.compartments}")


def full_rhs(model: ModelSpec, state: State) -> np.ndarray:
    """Time derivative of every compartment, shape ``(k, *grid.shape)``."""
    _check_state(model, state)
    return _discretization(model, state.grid).rhs(state.data)[0]


def _check_cfl(grid, dt, speed, epsilon, limit, strict):
    bound = cfl_timestep(grid, speed, epsilon, limit)
    if dt > bound * (1 + 1e-12):
        msg = f"dt={dt:g} exceeds the CFL bound {bound:g} (max speed {speed:g}, cfl {limit:g})"
        if strict:
            raise CFLViolation(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def _ssp_stages(disc: Discretization, u: np.ndarray, dt: float, k1: np.ndarray, rk: str) -> np.ndarray:
    u1 = u + dt * k1
    if rk == "ssp2":
        k2, _ = disc.rhs(u1)
        return 0.5 * u + 0.5 * (u1 + dt * k2)
    k2, _ = disc.rhs(u1)
    u2 = 0.75 * u + 0.25 * (u1 + dt * k2)
    k3, _ = disc.rhs(u2)
    return u / 3.0 + 2.0 / 3.0 * (u2 + dt * k3)


def rk_step(
    model: ModelSpec,
    state: State,
    dt: float,
    rk: str = "ssp2",
    strict: bool = True,
    cfl_limit: float = 0.5,
) -> State:
    """Advance one SSP Runge-Kutta step; checks the CFL bound and finiteness."""
    _check_state(model, state)
    if not (dt > 0 and np.isfinite(dt)):
        raise ValueError(f"dt must be positive, got {dt}")
    disc = _discretization(model, state.grid)
    k1, speed = disc.rhs(state.data)
    _check_cfl(state.grid, dt, speed, model.epsilon, cfl_limit, strict)
    new = _ssp_stages(disc, state.data, dt, k1, rk)
    out = State(state.grid, state.names, new, state.time + dt)
    if not np.all(np.isfinite(new)):
        raise NonFiniteState(f"non-finite values after step to t={out.time:g}", out)
    return out


def _ascending_sum(a: np.ndarray) -> float:
    flat = a.ravel()
    return float(np.cumsum(flat)[-1]) if flat.size else 0.0


def _boundary_margin(total: np.ndarray) -> int | None:
    """Cells between the support of ``total`` and the nearest domain edge."""
    margins = []
    for axis in range(total.ndim):
        other = tuple(a for a in range(total.ndim) if a != axis)
        occupied = np.flatnonzero(np.any(total != 0, axis=other) if other else total != 0)
        if occupied.size == 0:
            return None
        margins.append(min(int(occupied[0]), total.shape[axis] - 1 - int(occupied[-1])))
    return min(margins)


@dataclass
class RunSummary:
    steps: int = 0
    t_final: float = 0.0
    min_value: float = math.inf
    initial_mass: float = 0.0
    final_mass: float = 0.0
    max_rel_mass_drift: float = 0.0
    linf_envelope: dict = field(default_factory=dict)
    min_boundary_margin: int | None = None
    wall_time: float = 0.0
    aborted: bool = False
    message: str = ""
    backend: str = field(default_factory=backend_name)

    @property
    def mass_drift(self) -> float:
        return self.max_rel_mass_drift


class _Tracker:
    def __init__(self, state: State):
        m = state.grid.cell_measure
        self.measure = m
        self.summary = RunSummary(t_final=state.time)
        self.summary.initial_mass = self._mass(state.data)
        self.summary.linf_envelope = {n: 0.0 for n in state.names}
        self.observe(state)

    def _mass(self, data):
        return sum(_ascending_sum(row) for row in data) * self.measure

    def observe(self, state: State):
        s = self.summary
        data = state.data
        s.min_value = min(s.min_value, float(data.min()))
        for name, row in zip(state.names, data):
            s.linf_envelope[name] = max(s.linf_envelope[name], float(np.max(np.abs(row))))
        mass = self._mass(data)
        s.final_mass = mass
        if s.initial_mass > 0:
            s.max_rel_mass_drift = max(s.max_rel_mass_drift, abs(mass - s.initial_mass) / s.initial_mass)
        margin = _boundary_margin(data.sum(axis=0))
        if margin is not None:
            s.min_boundary_margin = margin if s.min_boundary_margin is None else min(s.min_boundary_margin, margin)
        s.t_final = state.time


Sink = Callable[[State, int], None]


def run(
    model: ModelSpec,
    init: State,
    config: SolverConfig,
    sinks: Iterable[Sink] = (),
) -> tuple[State, RunSummary]:
    """Integrate from ``init.time`` to ``init.time + config.t_final``.

    Sinks are called as ``sink(state, step)`` at step 0, every
    ``snapshot_every`` steps, and at the final step.  A non-finite state
    raises ``SolverAbort`` carrying the partial summary and last good state.
    """
    _check_state(model, init)
    if np.any(init.data < 0) or not np.all(np.isfinite(init.data)):
        raise ValueError("initial state must be finite and nonnegative")
    sinks = list(sinks)
    wall0 = _time.perf_counter()
    disc = _discretization(model, init.grid)
    state = init.copy()
    tracker = _Tracker(state)
    for sink in sinks:
        sink(state, 0)
    t0 = init.time
    t_end = t0 + config.t_final
    every = int(config.snapshot_every)

    if config.dt is not None:
        n_steps = 0 if config.t_final == 0 else max(1, math.ceil(config.t_final / config.dt - 1e-9))
    else:
        n_steps = None

    step = 0
    while True:
        if n_steps is not None:
            if step >= n_steps:
                break
        elif state.time >= t_end:
            break
        k1, speed = disc.rhs(state.data)
        if n_steps is not None:
            dt = config.dt if step + 1 < n_steps else config.t_final - step * config.dt
            _check_cfl(state.grid, config.dt, speed, model.epsilon, config.cfl_limit, config.strict_cfl)
            new_time = t0 + (step + 1) * config.dt if step + 1 < n_steps else t_end
        else:
            dt = min(cfl_timestep(state.grid, speed, model.epsilon, config.cfl), t_end - state.time)
            new_time = state.time + dt
            if t_end - new_time <= 1e-12 * max(1.0, abs(t_end)):
                dt, new_time = t_end - state.time, t_end
        new = _ssp_stages(disc, state.data, dt, k1, config.rk)
        step += 1
        if not np.all(np.isfinite(new)):
            tracker.summary.steps = step - 1
            tracker.summary.aborted = True
            tracker.summary.message = f"non-finite values at step {step}, t={new_time:g}"
            tracker.summary.wall_time = _time.perf_counter() - wall0
            raise SolverAbort(tracker.summary.message, tracker.summary, state)
        state = State(state.grid, state.names, new, new_time)
        tracker.observe(state)
        done = (n_steps is not None and step >= n_steps) or (n_steps is None and state.time >= t_end)
        if step % every == 0 or done:
            for sink in sinks:
                sink(state, step)

    summary = tracker.summary
    summary.steps = step
    summary.wall_time = _time.perf_counter() - wall0
    return state, summary
