"""Mass, norms, invariant tracking, grid-refinement and vanishing-viscosity studies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .equilibria import support_width
from .grid import Field, Grid, build_grid
from .models import ModelSpec
from .solver import SolverConfig, State, run

MASS_DRIFT_TOL = 1e-9
POSITIVITY_FLOOR = -1e-12


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)


def total_mass(grid: Grid, field: Field | np.ndarray) -> float:
    """``sum_j u_j |cell|``, summed in ascending cell order."""
    flat = _values(field).ravel()
    if flat.size == 0:
        return 0.0
    return float(np.cumsum(flat)[-1]) * grid.cell_measure


def lp_norm(grid: Grid, field: Field | np.ndarray, p=2) -> float:
    u = np.abs(_values(field))
    if p in (math.inf, "inf", "Linf"):
        return float(u.max(initial=0.0))
    if p == 1:
        return float(u.sum() * grid.cell_measure)
    if p == 2:
        return float(np.sqrt((u * u).sum() * grid.cell_measure))
    raise ValueError(f"p must be 1, 2 or inf, got {p!r}")


def gradient_l2(grid: Grid, field: Field | np.ndarray) -> float:
    """L2 norm of the one-sided difference quotient, ghost cells included."""
    u = np.pad(_values(field), 1)
    acc = 0.0
    for axis, h in enumerate(grid.dx):
        d = np.diff(u, axis=axis) / h
        acc += float((d * d).sum())
    return math.sqrt(acc * grid.cell_measure)


@dataclass
class DiagnosticSeries:
    names: tuple[str, ...]
    times: list = field(default_factory=list)
    total_mass: list = field(default_factory=list)
    per_compartment_mass: list = field(default_factory=list)
    linf_per_compartment: list = field(default_factory=list)
    min_value: list = field(default_factory=list)
    support_width_N: list = field(default_factory=list)
    grad_l2_N: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def record(self, state: State) -> None:
        if self.times and state.time <= self.times[-1]:
            raise ValueError("diagnostic times must be strictly increasing")
        grid = state.grid
        per = [total_mass(grid, row) for row in state.data]
        n_total = Field(grid, state.total())
        self.times.append(float(state.time))
        self.per_compartment_mass.append(per)
        self.total_mass.append(float(sum(per)))
        self.linf_per_compartment.append([float(np.abs(row).max()) for row in state.data])
        self.min_value.append(float(state.data.min()))
        self.support_width_N.append(support_width(n_total, 0.1))
        self.grad_l2_N.append(gradient_l2(grid, n_total))

    def __call__(self, state: State, step: int) -> None:
        self.record(state)

    def relative_mass_drift(self) -> float:
        if not self.total_mass or self.total_mass[0] == 0:
            return 0.0
        m0 = self.total_mass[0]
        return max(abs(m - m0) / m0 for m in self.total_mass)

    def violations(self, mass_tol: float = MASS_DRIFT_TOL, floor: float = POSITIVITY_FLOOR) -> list[str]:
        out = []
        drift = self.relative_mass_drift()
        if drift > mass_tol:
            out.append(f"relative mass drift {drift:.3e} exceeds {mass_tol:.1e}")
        low = min(self.min_value, default=0.0)
        if low < floor:
            out.append(f"minimum value {low:.3e} below {floor:.1e}")
        return out

    def header(self) -> list[str]:
        return (
            ["t", "total_mass"]
            + [f"linf_{n}" for n in self.names]
            + ["min_value", "support_width_N", "grad_l2_N"]
        )

    def rows(self):
        for k in range(len(self.times)):
            yield (
                [self.times[k], self.total_mass[k]]
                + list(self.linf_per_compartment[k])
                + [self.min_value[k], self.support_width_N[k], self.grad_l2_N[k]]
            )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def coarsen(values: np.ndarray, factor: int = 2) -> np.ndarray:
    """Average ``factor`` consecutive cells per axis (mass-preserving restriction)."""
    v = np.asarray(values, dtype=np.float64)
    shape = []
    for n in v.shape:
        if n % factor:
            raise ValueError(f"axis length {n} not divisible by {factor}")
        shape += [n // factor, factor]
    return v.reshape(shape).mean(axis=tuple(range(1, 2 * v.ndim, 2)))


@dataclass
class RefinementResult:
    dx: list
    errors: list
    orders: list
    order: float
    verdict: str

    def rows(self):
        for k, h in enumerate(self.dx):
            err = self.errors[k] if k < len(self.errors) else ""
            order = self.orders[k - 1] if 0 < k <= len(self.orders) else ""
            yield [h, err, order]


def refinement_order(
    model: ModelSpec,
    init_fn: Callable[[Grid], State],
    config: SolverConfig,
    dx_list: Sequence[float],
    lo=-1.0,
    hi=1.0,
) -> RefinementResult:
    """Observed convergence order from successive L1 differences.

    The solution at width ``dx[k+1]`` is coarsened by 2-cell averaging and
    compared against the one at ``dx[k]``.  A fixed ``config.dt`` is scaled
    with the mesh width so the CFL number stays constant.
    """
    dx_list = [float(h) for h in dx_list]
    if len(dx_list) < 3:
        raise ValueError("need at least three mesh widths")
    for a, b in zip(dx_list, dx_list[1:]):
        if not math.isclose(a / b, 2.0, rel_tol=1e-9):
            raise ValueError("mesh widths must decrease by a factor of 2")
    lo_a = np.atleast_1d(lo).astype(float)
    hi_a = np.atleast_1d(hi).astype(float)
    finals = []
    for h in dx_list:
        n = [int(round((b - a) / h)) for a, b in zip(lo_a, hi_a)]
        grid = build_grid(lo_a if len(n) > 1 else lo_a[0], hi_a if len(n) > 1 else hi_a[0], n if len(n) > 1 else n[0])
        cfg = config if config.dt is None else replace(config, dt=config.dt * h / dx_list[0])
        final, _ = run(model, init_fn(grid), cfg)
        finals.append((grid, final))
    errors = []
    for (g_c, coarse), (_, fine) in zip(finals, finals[1:]):
        diff = sum(np.abs(coarsen(f) - c).sum() for f, c in zip(fine.data, coarse.data))
        errors.append(float(diff * g_c.cell_measure))
    if all(e == 0 for e in errors):
        return RefinementResult(dx_list, errors, [math.inf] * (len(errors) - 1), math.inf, "exact")
    orders = [math.log2(a / b) if a > 0 and b > 0 else math.inf for a, b in zip(errors, errors[1:])]
    finite = [o for o in orders if math.isfinite(o)]
    order = float(np.mean(finite)) if finite else math.inf
    return RefinementResult(dx_list, errors, orders, order, f"order {order:.3f}")


@dataclass
class ViscosityStudy:
    names: tuple[str, ...]
    eps: list
    distances: list  # one row per eps: L2 distance per compartment

    @property
    def monotone(self) -> bool:
        """Strictly decreasing along the eps list, for every compartment."""
        d = np.asarray(self.distances)
        if len(d) < 2:
            return True
        return bool(np.all(d[1:] < d[:-1]))

    def slopes(self) -> list[float]:
        """Least-squares slope of log distance against log eps, per compartment."""
        eps = np.asarray(self.eps, dtype=float)
        d = np.asarray(self.distances, dtype=float)
        ok = (eps > 0) & np.all(d > 0, axis=1)
        if ok.sum() < 2:
            return [math.nan] * len(self.names)
        x = np.log(eps[ok])
        return [float(np.polyfit(x, np.log(d[ok, k]), 1)[0]) for k in range(d.shape[1])]

    def rows(self):
        for e, row in zip(self.eps, self.distances):
            yield [e, *row]


def viscosity_study(model: ModelSpec, init: State, config: SolverConfig, eps_list: Sequence[float]) -> ViscosityStudy:
    """``||u_eps - u_0||_L2`` at the final time for each eps, per compartment."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps_list is empty")
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be >= 0")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    ref, _ = run(replace(model, epsilon=0.0), init, config)
    rows = []
    for e in eps_list:
        if e == 0:
            rows.append([0.0] * len(model.compartments))
            continue
        sol, _ = run(replace(model, epsilon=e), init, config)
        rows.append([lp_norm(init.grid, a - b, 2) for a, b in zip(sol.data, ref.data)])
    return ViscosityStudy(tuple(model.compartments), eps_list, rows)
