import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggsir.errors import CFLViolation, NonFiniteState, ShapeMismatch, SizeMismatch, SolverAbort
from aggsir.grid import build_grid, indicator, project_function
from aggsir.kernels import Gaussian, KernelMatrix, QuadAbs, Zero
from aggsir.models import make_generic, make_sir, make_sis
from aggsir.solver import (
    SolverConfig,
    State,
    cfl_timestep,
    diffusion_rhs,
    full_rhs,
    rk_step,
    run,
    transport_rhs,
)

from oracles import sis_logistic, sis_rk4, upwind_step_reference


def uniform_sis(s, i, n=8):
    g = build_grid(0, 1, n)
    return g, State(g, ("S", "I"), np.stack([np.full(n, s), np.full(n, i)]))


def plateau_sis(n=340, s=1.0, i=0.05, half=0.5):
    g = build_grid(-1.7, 1.7, n)
    S = project_function(g, indicator(-half, half, s))
    I = project_function(g, indicator(-half, half, i))
    return g, State.from_fields(("S", "I"), [S, I])


# -- time step ---------------------------------------------------------------


def test_cfl_timestep_examples():
    g = build_grid(0, 1, 100)
    assert cfl_timestep(g, 1.0, 0.0, 0.5) == pytest.approx(0.005)
    # transport and diffusion rates add: 1/0.01 + 2*0.01/1e-4 = 300
    assert cfl_timestep(g, 1.0, 0.01, 0.5) == pytest.approx(0.5 / 300)
    assert math.isfinite(cfl_timestep(g, 0.0, 0.0, 0.5))
    assert cfl_timestep(g, 0.0, 0.0, 0.5) > 1e100


# -- spatial operators ------------------------------------------------------


def test_transport_single_cell_example():
    g = build_grid(0, 1, 10)
    u = np.zeros(10)
    u[4] = 1.0
    v = np.zeros(11)
    v[5] = 1.0  # right face of cell 4
    r = transport_rhs(g, u, v)
    assert r[4] == pytest.approx(-10.0)
    assert r[5] == pytest.approx(10.0)
    assert np.count_nonzero(r) == 2


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_transport_matches_reference_step(seed):
    rng = np.random.default_rng(seed)
    n = 25
    g = build_grid(0, 1, n)
    u = rng.uniform(0, 1, n)
    v = rng.normal(size=n + 1)
    dt = 1e-3
    got = u + dt * transport_rhs(g, u, v)
    np.testing.assert_allclose(got, upwind_step_reference(u, v, g.dx[0], dt), rtol=1e-13, atol=1e-15)


def test_transport_telescopes_with_zero_boundary_velocity():
    rng = np.random.default_rng(4)
    g = build_grid(0, 1, 30)
    u = rng.uniform(size=30)
    v = rng.normal(size=31)
    v[0] = v[-1] = 0.0
    assert abs(transport_rhs(g, u, v).sum()) < 1e-12


def test_transport_size_checks():
    g = build_grid(0, 1, 10)
    with pytest.raises(SizeMismatch):
        transport_rhs(g, np.zeros(10), np.zeros(10))
    with pytest.raises(SizeMismatch):
        transport_rhs(g, np.zeros(9), np.zeros(11))


def test_transport_2d_conserves_and_moves_right():
    g = build_grid([0, 0], [1, 1], [8, 8])
    u = np.zeros((8, 8))
    u[3, 3] = 1.0
    vx = np.full((9, 8), 0.5)
    vy = np.zeros((8, 9))
    r = transport_rhs(g, u, (vx, vy))
    assert r[3, 3] < 0 and r[4, 3] > 0
    assert r.sum() == pytest.approx(0.0, abs=1e-12)


def test_diffusion_examples():
    g = build_grid(0, 1, 20)
    x = g.centers()
    assert np.all(diffusion_rhs(g, np.ones(20), 0.0) == 0)
    q = x**2
    r = diffusion_rhs(g, q, 0.1)
    # centered Laplacian is exact on quadratics away from the ghost cells
    np.testing.assert_allclose(r[1:-1], 0.2, rtol=1e-9)
    c = diffusion_rhs(g, np.ones(20), 0.3)
    np.testing.assert_allclose(c[1:-1], 0.0, atol=1e-9)
    assert c[0] < 0 and c[-1] < 0  # mass leaks into the zero ghost cells


def test_full_rhs_examples():
    _, state = uniform_sis(1.0, 1.0)
    model = make_sis(1, 1, Zero())
    np.testing.assert_array_equal(full_rhs(model, state), 0.0)
    _, state = uniform_sis(2.0, 0.5)
    r = full_rhs(model, state)
    np.testing.assert_allclose(r[1], 2 * 0.5 - 0.5)
    np.testing.assert_allclose(r.sum(axis=0), 0.0)
    with pytest.raises(ShapeMismatch):
        full_rhs(make_generic(KernelMatrix.shared_kernel(("A", "B"), Zero())), state)


# -- stepping ---------------------------------------------------------------


def test_rk_step_fixed_point():
    model = make_sis(1, 1, Zero())
    _, state = uniform_sis(1.0, 1.0)
    for rk in ("ssp2", "ssp3"):
        out = rk_step(model, state, 0.01, rk)
        np.testing.assert_array_equal(out.data, state.data)
        assert out.time == pytest.approx(0.01)


def test_rk_step_nonfinite_raises():
    model = make_sis(1, 1, Zero())
    _, state = uniform_sis(1e200, 1e200)
    with pytest.raises(NonFiniteState) as exc, np.errstate(over="ignore", invalid="ignore"):
        rk_step(model, state, 1.0)
    assert exc.value.state is not None


def test_ode_limit_against_closed_form():
    model = make_sis(1, 1, Zero())
    _, init = uniform_sis(2.0, 0.1, n=4)
    final, _ = run(model, init, SolverConfig(t_final=2.0, dt=1e-3, rk="ssp3"))
    s, i = sis_logistic(2.0, 0.1, 1, 1, 2.0)
    assert final.data[0, 0] == pytest.approx(s, rel=1e-7)
    assert final.data[1, 0] == pytest.approx(i, rel=1e-7)
    s4, i4 = sis_rk4(2.0, 0.1, 1, 1, 2.0, 1e-3)
    assert (s4, i4) == pytest.approx((s, i), rel=1e-10)


def test_ssp2_is_second_order():
    model = make_sis(1, 1, Zero())
    _, init = uniform_sis(2.0, 0.1, n=4)
    s, i = sis_logistic(2.0, 0.1, 1, 1, 1.0)
    errs = []
    for dt in (0.02, 0.01, 0.005):
        final, _ = run(model, init, SolverConfig(t_final=1.0, dt=dt))
        errs.append(abs(final.data[1, 0] - i))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2, abs=0.15)
    assert math.log2(errs[1] / errs[2]) == pytest.approx(2, abs=0.15)


def test_fixed_dt_lands_on_t_final_and_counts_steps():
    model = make_sis(1, 1, Zero())
    _, init = uniform_sis(1.0, 0.5)
    final, summary = run(model, init, SolverConfig(t_final=0.1, dt=0.03))
    assert summary.steps == 4
    assert final.time == 0.1
    final, summary = run(model, init, SolverConfig(t_final=1.0, dt=0.1))
    assert summary.steps == 10 and final.time == 1.0


def test_zero_final_time_returns_initial_state():
    model = make_sis(1, 1, QuadAbs(0.5))
    _, init = plateau_sis()
    calls = []
    final, summary = run(model, init, SolverConfig(t_final=0.0, dt=1e-3), [lambda s, k: calls.append(k)])
    np.testing.assert_array_equal(final.data, init.data)
    assert summary.steps == 0 and calls == [0]


def test_run_is_deterministic():
    model = make_sis(1, 1, QuadAbs(0.5))
    _, init = plateau_sis(n=170, i=0.3, half=0.3)
    cfg = SolverConfig(t_final=0.2, dt=1e-3)
    a, sa = run(model, init, cfg)
    b, sb = run(model, init, cfg)
    np.testing.assert_array_equal(a.data, b.data)
    assert sa.final_mass == sb.final_mass


def test_sinks_called_on_schedule():
    model = make_sis(1, 1, Zero())
    _, init = uniform_sis(1.0, 0.5)
    seen = []
    run(model, init, SolverConfig(t_final=0.1, dt=0.01, snapshot_every=3), [lambda s, k: seen.append(k)])
    assert seen == [0, 3, 6, 9, 10]


def test_adaptive_cfl_mode_reaches_end_time():
    model = make_sis(1, 1, QuadAbs(0.5))
    _, init = plateau_sis(n=170)
    final, summary = run(model, init, SolverConfig(t_final=0.3, cfl=0.4))
    assert final.time == pytest.approx(0.3, abs=1e-15)
    assert summary.min_value >= -1e-12
    assert summary.max_rel_mass_drift <= 1e-12


def test_strict_cfl_rejects_and_permissive_warns():
    g = build_grid(-1, 1, 200)
    km = KernelMatrix.shared_kernel(("S", "I"), Gaussian(50.0, 0.1))
    model = make_sis(1, 1, Gaussian(50.0, 0.1))
    assert model.kernel_matrix == km
    S = project_function(g, indicator(-0.6, 0.6, 1.0))
    init = State.from_fields(("S", "I"), [S, S])
    with pytest.raises(CFLViolation):
        run(model, init, SolverConfig(t_final=0.05, dt=0.01))
    with pytest.warns(RuntimeWarning, match="CFL"):
        run(model, init, SolverConfig(t_final=0.01, dt=0.01, strict_cfl=False))


def test_nan_aborts_with_summary():
    km = KernelMatrix.shared_kernel(("A",), Zero())

    def blowup(u):
        return u * u * 1e300

    model = make_generic(km, blowup)
    g = build_grid(0, 1, 4)
    init = State(g, ("A",), np.ones((1, 4)))
    with pytest.raises(SolverAbort) as exc, np.errstate(over="ignore", invalid="ignore"):
        run(model, init, SolverConfig(t_final=1.0, dt=0.1))
    assert exc.value.summary.aborted
    assert np.all(np.isfinite(exc.value.state.data))


def test_run_rejects_negative_initial_data():
    model = make_sis(1, 1, Zero())
    _, init = uniform_sis(1.0, -0.1)
    with pytest.raises(ValueError):
        run(model, init, SolverConfig(t_final=0.1, dt=0.01))


@pytest.mark.parametrize(
    "kwargs",
    [dict(t_final=1.0), dict(t_final=1.0, dt=0.1, cfl=0.5), dict(t_final=-1, dt=0.1), dict(t_final=1, dt=0.1, rk="rk4")],
)
def test_solver_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


# -- invariants on random problems --------------------------------------------


def _random_sir(rng):
    km = KernelMatrix.from_pairs(
        ("S", "I", "R"),
        {
            (a, b): Gaussian(float(rng.uniform(0.2, 2)), float(rng.uniform(0.1, 0.5)), bool(rng.integers(2)))
            for a in "SIR"
            for b in "SIR"
        },
    )
    return make_sir(float(rng.uniform(0, 2)), float(rng.uniform(0, 3)), km, float(rng.choice([0.0, 1e-3])))


@pytest.mark.parametrize("seed", range(6))
def test_random_runs_positive_and_conservative(seed):
    rng = np.random.default_rng(seed)
    if seed % 2:
        model = _random_sir(rng)
        names = ("S", "I", "R")
    else:
        model = make_sis(float(rng.uniform(0, 2)), float(rng.uniform(0, 3)), QuadAbs(float(rng.uniform(0.2, 0.8))))
        names = ("S", "I")
    g = build_grid(-2, 2, 120)
    x = g.centers()
    data = np.stack([np.where(np.abs(x - rng.uniform(-0.5, 0.5)) < rng.uniform(0.1, 0.5), rng.uniform(0, 2), 0.0) for _ in names])
    init = State(g, names, data)
    final, summary = run(model, init, SolverConfig(t_final=0.3, cfl=0.5))
    assert summary.min_value >= -1e-12
    if model.epsilon == 0 and summary.min_boundary_margin >= 5:
        assert summary.max_rel_mass_drift <= 1e-9
