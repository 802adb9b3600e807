import math

import numpy as np
import pytest

from aggsir.cli import preset_text
from aggsir.config import parse_config
from aggsir.diagnostics import (
    DiagnosticSeries,
    coarsen,
    gradient_l2,
    lp_norm,
    refinement_order,
    total_mass,
    viscosity_study,
)
from aggsir.grid import build_grid, indicator, project_function
from aggsir.kernels import QuadAbs
from aggsir.models import make_sis
from aggsir.solver import SolverConfig, State, run


def test_mass_and_norms_of_constants():
    g = build_grid(0, 2, 10)
    ones = np.full(10, 3.0)
    assert total_mass(g, ones) == pytest.approx(6.0)
    assert lp_norm(g, ones, 1) == pytest.approx(6.0)
    assert lp_norm(g, ones, 2) == pytest.approx(3.0 * math.sqrt(2))
    assert lp_norm(g, ones, math.inf) == 3.0
    # constant fields: L1 <= |domain|^(1/2) L2 <= |domain| Linf, all equalities
    assert lp_norm(g, ones, 1) == pytest.approx(math.sqrt(2) * lp_norm(g, ones, 2))
    with pytest.raises(ValueError):
        lp_norm(g, ones, 3)


def test_gradient_l2_counts_the_jumps_at_the_walls():
    g = build_grid(0, 1, 10)
    # a unit constant jumps to zero ghost values at both ends
    assert gradient_l2(g, np.ones(10)) == pytest.approx(math.sqrt(2 / 0.01 * 0.1))


def test_coarsen_preserves_mass():
    rng = np.random.default_rng(0)
    u = rng.uniform(size=(8, 6))
    c = coarsen(u)
    assert c.shape == (4, 3)
    assert c.sum() * 4 == pytest.approx(u.sum())
    with pytest.raises(ValueError):
        coarsen(np.ones(5))


def _sis_run(series, t_final=0.05):
    g = build_grid(-1.7, 1.7, 340)
    S = project_function(g, indicator(-0.5, 0.5, 1.0))
    I = project_function(g, indicator(-0.1, 0.1, 0.25))
    init = State.from_fields(("S", "I"), [S, I])
    return run(make_sis(1, 1, QuadAbs(0.5)), init, SolverConfig(t_final=t_final, dt=1e-3, snapshot_every=10), [series])


def test_series_records_and_writes_csv(tmp_path):
    series = DiagnosticSeries(("S", "I"))
    _sis_run(series)
    assert len(series) == 6
    assert series.relative_mass_drift() < 1e-12
    assert series.violations() == []
    path = tmp_path / "d.csv"
    series.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,total_mass,linf_S,linf_I,min_value,support_width_N,grad_l2_N"
    assert len(lines) == 7
    with pytest.raises(ValueError):
        series.record(State(build_grid(0, 1, 10), ("S", "I"), np.zeros((2, 10)), 0.0))


def test_series_flags_violations():
    s = DiagnosticSeries(("A",))
    s.times, s.total_mass, s.min_value = [0, 1], [1.0, 1.1], [0.0, -1e-6]
    v = s.violations()
    assert len(v) == 2


def test_refinement_order_on_transport_preset():
    cfg = parse_config(preset_text("transport"))
    model, grid, init, sc = cfg.build()
    res = refinement_order(model, cfg.build_state, sc, [0.02, 0.01, 0.005], -1.0, 1.0)
    assert 0.8 <= res.order <= 1.2
    assert len(list(res.rows())) == 3


def test_refinement_order_zero_data_is_exact():
    cfg = parse_config(preset_text("transport"))
    model, grid, init, sc = cfg.build()

    def zeros(g):
        return State(g, model.compartments, np.zeros((2, *g.shape)))

    res = refinement_order(model, zeros, sc, [0.04, 0.02, 0.01], -1.0, 1.0)
    assert res.verdict == "exact"


@pytest.mark.parametrize("dx", [[0.02, 0.01], [0.02, 0.015, 0.01]])
def test_refinement_order_rejects_bad_ladders(dx):
    cfg = parse_config(preset_text("transport"))
    model, grid, init, sc = cfg.build()
    with pytest.raises(ValueError):
        refinement_order(model, cfg.build_state, sc, dx)


def test_viscosity_study_short_run():
    g = build_grid(-1.7, 1.7, 340)
    S = project_function(g, indicator(-0.5, 0.5, 0.4))
    I = project_function(g, indicator(-0.1, 0.1, 0.25))
    init = State.from_fields(("S", "I"), [S, I])
    res = viscosity_study(make_sis(1, 0.5, QuadAbs(0.5)), init, SolverConfig(t_final=0.2, dt=1e-3), [1e-2, 1e-3, 1e-4])
    assert res.monotone
    assert all(s > 0 for s in res.slopes())
    zero = viscosity_study(make_sis(1, 0.5, QuadAbs(0.5)), init, SolverConfig(t_final=0.01, dt=1e-3), [1e-3, 0.0])
    assert zero.distances[-1] == [0.0, 0.0]
    with pytest.raises(ValueError):
        viscosity_study(make_sis(1, 0.5, QuadAbs(0.5)), init, SolverConfig(t_final=0.01, dt=1e-3), [])
    with pytest.raises(ValueError):
        viscosity_study(make_sis(1, 0.5, QuadAbs(0.5)), init, SolverConfig(t_final=0.01, dt=1e-3), [1e-4, 1e-3])
