"""Closed-form steady states of the 1D SIS model with W(x) = x^2 - gamma|x|.

With all kernels equal to that potential, the total population N = S + I
settles on the plateau ``(M/gamma) * 1_[c - gamma/2, c + gamma/2]`` and the
reactions then balance cellwise:

* disease-free: S = M/gamma, I = 0, for every M >= 0;
* endemic: S = alpha/beta, I = M/gamma - alpha/beta, iff R0 = M beta/(gamma alpha) > 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import NonPositiveAlpha, NonPositiveGamma, ShapeMismatch, SupportExceedsDomain
from .grid import Field, Grid, average_indicator, indicator, project_function
from .kernels import QuadAbs
from .models import SIS, ModelSpec

NORMS = ("L1", "L2", "Linf")
SUPPORT_MARGIN_CELLS = 5


def compute_r0(M: float, beta: float, gamma: float, alpha: float) -> float:
    """Space-dependent basic reproduction number ``M beta / (gamma alpha)``."""
    if not alpha > 0:
        raise NonPositiveAlpha(f"alpha must be > 0, got {alpha}")
    if not gamma > 0:
        raise NonPositiveGamma(f"gamma must be > 0, got {gamma}")
    if M < 0 or beta < 0:
        raise ValueError(f"M and beta must be >= 0, got M={M}, beta={beta}")
    return M * beta / (gamma * alpha)


def above_threshold(M: float, alpha: float, beta: float, gamma: float) -> bool:
    """``M beta / (gamma alpha) > 1`` decided in exact rational arithmetic.

    The float quotient can round across 1 near the threshold; binary floats
    are exact rationals, so comparing ``M beta`` with ``gamma alpha`` as
    fractions never misclassifies.
    """
    compute_r0(M, beta, gamma, alpha)
    return Fraction(M) * Fraction(beta) > Fraction(gamma) * Fraction(alpha)


@dataclass(frozen=True)
class EquilibriumReport:
    M: float
    gamma: float
    alpha: float
    beta: float
    r0: float
    center: float
    support: tuple[float, float]
    disease_free: dict
    endemic: dict | None

    @property
    def classification(self) -> str:
        return "endemic" if self.endemic is not None else "disease-free"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification
        return d


def analytic_steady_states(M: float, alpha: float, beta: float, gamma: float, center: float = 0.0) -> EquilibriumReport:
    """Plateau values and support of the steady states for total mass ``M``.

    The endemic branch is present exactly when R0 > 1 (see ``above_threshold``).
    """
    r0 = compute_r0(M, beta, gamma, alpha)
    height = M / gamma
    disease_free = {"S": height, "I": 0.0}
    endemic = None
    if above_threshold(M, alpha, beta, gamma):
        s = alpha / beta
        endemic = {"S": s, "I": height - s}
    return EquilibriumReport(
        M=float(M),
        gamma=float(gamma),
        alpha=float(alpha),
        beta=float(beta),
        r0=r0,
        center=float(center),
        support=(center - gamma / 2, center + gamma / 2),
        disease_free=disease_free,
        endemic=endemic,
    )


def qualifying_gamma(model: ModelSpec) -> float | None:
    """gamma of the shared QuadAbs kernel if ``model`` is the SIS case the theory covers."""
    km = model.kernel_matrix
    if not isinstance(model.reaction, SIS):
        return None
    specs = list(km.entries.values())
    if not all(isinstance(s, QuadAbs) for s in specs):
        return None
    if len({s.gamma for s in specs}) != 1:
        return None
    return specs[0].gamma


def _check_support_fits(grid: Grid, lo: float, hi: float) -> None:
    if grid.dim != 1:
        raise ShapeMismatch("steady profiles are one-dimensional")
    margin = SUPPORT_MARGIN_CELLS * grid.dx[0]
    if lo < grid.lo[0] + margin or hi > grid.hi[0] - margin:
        raise SupportExceedsDomain(
            f"support [{lo:g}, {hi:g}] needs a {SUPPORT_MARGIN_CELLS}-cell margin inside "
            f"[{grid.lo[0]:g}, {grid.hi[0]:g}]"
        )


def steady_total_profile(grid: Grid, M: float, gamma: float, center: float = 0.0) -> Field:
    """Midpoint projection of ``(M/gamma) 1_[center - gamma/2, center + gamma/2]``."""
    if not gamma > 0:
        raise NonPositiveGamma(f"gamma must be > 0, got {gamma}")
    lo, hi = center - gamma / 2, center + gamma / 2
    _check_support_fits(grid, lo, hi)
    if M == 0:
        return Field.zeros(grid)
    return project_function(grid, indicator(lo, hi, M / gamma))


def steady_state_fields(grid: Grid, report: EquilibriumReport, branch: str = "endemic", exact: bool = False):
    """(S, I) fields of one branch on ``grid``.

    ``exact=True`` gives exact cell averages of the indicator profile instead
    of the midpoint projection.
    """
    values = report.endemic if branch == "endemic" else report.disease_free
    if values is None:
        raise ValueError(f"no endemic equilibrium for R0 = {report.r0:g}")
    lo, hi = report.support
    _check_support_fits(grid, lo, hi)
    if exact:
        return tuple(average_indicator(grid, lo, hi, values[k]) for k in ("S", "I"))
    return tuple(project_function(grid, indicator(lo, hi, values[k])) for k in ("S", "I"))


def center_of_mass(grid: Grid, field: Field | np.ndarray) -> float:
    values = field.values if isinstance(field, Field) else np.asarray(field)
    mass = values.sum()
    if mass == 0:
        return 0.5 * (grid.lo[0] + grid.hi[0])
    return float((values * grid.centers(0)).sum() / mass)


def _values(f):
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)


def distance_to_state(grid: Grid, state, reference, norm: str = "L1") -> float:
    """Sum over compartments of the cell-measure-weighted distance.

    ``reference`` is a sequence of Fields/arrays in the state's compartment
    order (or a State).
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    rows = state.data if hasattr(state, "data") else [_values(f) for f in state]
    refs = reference.data if hasattr(reference, "data") else [_values(f) for f in reference]
    if len(rows) != len(refs):
        raise ShapeMismatch(f"{len(rows)} compartments against {len(refs)} reference fields")
    m = grid.cell_measure
    total = 0.0
    for u, r in zip(rows, refs):
        u = np.asarray(u)
        r = np.asarray(r)
        if u.shape != r.shape or u.shape != grid.shape:
            raise ShapeMismatch(f"shapes {u.shape} and {r.shape} on grid {grid.shape}")
        d = np.abs(u - r)
        if norm == "L1":
            total += float(d.sum() * m)
        elif norm == "L2":
            total += float(np.sqrt((d * d).sum() * m))
        else:
            total += float(d.max(initial=0.0))
    return total


def support_width(field: Field, threshold_fraction: float = 0.1) -> float:
    """Extent of the cells whose value exceeds ``threshold_fraction * max``.

    Counted from the first to the last such cell inclusive (1D), so a plateau
    of k cells has width ``k * dx``.  Zero fields have width 0.
    """
    if not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    values = field.values
    peak = values.max(initial=0.0)
    if peak <= 0:
        return 0.0
    grid = field.grid
    above = values > threshold_fraction * peak
    widths = []
    for axis in range(grid.dim):
        other = tuple(a for a in range(grid.dim) if a != axis)
        idx = np.flatnonzero(np.any(above, axis=other) if other else above)
        widths.append((idx[-1] - idx[0] + 1) * grid.dx[axis])
    return float(max(widths))


def plateau_interior(field: Field, threshold_fraction: float = 0.1, exclude: int = 3) -> slice:
    """Index range of the supported cells with ``exclude`` cells dropped per edge."""
    values = field.values
    peak = values.max(initial=0.0)
    idx = np.flatnonzero(values > threshold_fraction * peak)
    if idx.size == 0:
        return slice(0, 0)
    return slice(idx[0] + exclude, idx[-1] + 1 - exclude)
