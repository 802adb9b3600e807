import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggsir.errors import InvalidBounds, NonFiniteSample, TooFewCells
from aggsir.grid import average_indicator, build_grid, indicator, project_function


def test_reference_grid_spacing():
    g = build_grid(-1.7, 1.7, 340)
    assert g.dim == 1
    assert g.dx[0] == pytest.approx(0.01, rel=1e-12)


def test_centers_and_interfaces_on_unit_interval():
    g = build_grid(0.0, 1.0, 4)
    assert g.dx == (0.25,)
    np.testing.assert_array_equal(g.centers(), [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_array_equal(g.interfaces(), [0.0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize(
    "lo, hi, n, exc",
    [(0.0, 1.0, 3, TooFewCells), (1.0, 1.0, 10, InvalidBounds), (1.0, 0.0, 10, InvalidBounds)],
)
def test_build_grid_rejects(lo, hi, n, exc):
    with pytest.raises(exc):
        build_grid(lo, hi, n)


def test_2d_grid_is_tensor_product():
    g = build_grid([-1, 0], [1, 2], [8, 4])
    assert g.shape == (8, 4)
    assert g.size == 32
    x, y = g.mesh()
    np.testing.assert_array_equal(x[:, 0], g.centers(0))
    np.testing.assert_array_equal(y[0, :], g.centers(1))
    assert g.cell_measure == pytest.approx(0.25 * 0.5)


def test_cells_tile_the_domain():
    g = build_grid(-1.7, 1.7, 340)
    assert g.size * g.cell_measure == pytest.approx(g.measure, rel=1e-14)


def test_coordinates_not_accumulated():
    g = build_grid(-1.7, 1.7, 340)
    expected = np.array([-1.7 + k * g.dx[0] for k in range(341)])
    np.testing.assert_array_equal(g.interfaces(), expected)


def test_project_zero_and_constant():
    g = build_grid(0, 2, 40)
    assert np.all(project_function(g, lambda x: 0 * x).values == 0)
    c = 3.5
    f = project_function(g, lambda x: c)
    assert f.values.sum() * g.dx[0] == pytest.approx(c * 40 * g.dx[0])


def test_project_indicator_mass_against_exact_integral():
    g = build_grid(-1.7, 1.7, 340)
    f = project_function(g, indicator(-0.25, 0.25, 2.0))
    exact = 2.0 * 0.5
    assert abs(f.values.sum() * g.dx[0] - exact) <= 1 * g.dx[0] * 2


def test_project_scalar_only_callable():
    g = build_grid(0, 1, 8)
    f = project_function(g, lambda x: 1.0 if x > 0.5 else 0.0)
    np.testing.assert_array_equal(f.values, [0, 0, 0, 0, 1, 1, 1, 1])


def test_project_nonfinite():
    g = build_grid(-1, 1, 10)
    with pytest.raises(NonFiniteSample):
        with np.errstate(divide="ignore"):
            project_function(g, lambda x: 1.0 / (x - g.centers()[3]))


def test_project_clamps_roundoff_negatives_only():
    g = build_grid(0, 1, 4)
    vals = project_function(g, lambda x: np.array([-1e-15, -1e-3, 0.5, 1.0])).values
    assert vals[0] == 0.0
    assert vals[1] == -1e-3


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(-5, 5),
    b=st.floats(-5, 5),
    shift=st.floats(-1, 1),
)
def test_projection_is_linear(a, b, shift):
    g = build_grid(-1.0, 1.0, 37)

    def f(x):
        return np.sin(3 * x) + shift

    def h(x):
        return x**2

    lhs = project_function(g, lambda x: a * f(x) + b * h(x)).values
    rhs = a * project_function(g, f).values + b * project_function(g, h).values
    # the clamp can differ only for |values| <= 1e-14
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-13)


def test_average_indicator_exact_overlap():
    g = build_grid(0, 1, 10)
    f = average_indicator(g, 0.05, 0.32, 2.0)
    assert f.values.sum() * g.dx[0] == pytest.approx(2.0 * 0.27)
    assert f.values[0] == pytest.approx(1.0)
    assert f.values[3] == pytest.approx(2.0 * 0.2)
