import math

import numpy as np
import pytest
from scipy.special import erf

from core.errors import DomainError, TruncationError, UnsupportedError
from core.grid import (
    CutoffProfile,
    Field,
    Grid,
    cutoff_field,
    cutoff_gradient,
    cutoff_laplacian,
    cutoff_value,
    drift_values,
    gaussian_weight,
    gradient_values,
    interpolate,
    laplacian_values,
    quadrature_weights,
    read_field,
    sup_norm,
    weighted_divergence,
    weighted_integral,
    weighted_lebesgue_norm,
    weighted_sobolev_norm,
    write_field,
)

SQRT_4PI = math.sqrt(4.0 * math.pi)


def scalar_field(grid, values):
    return Field(grid, np.asarray(values)[np.newaxis])


def test_grid_layout():
    grid = Grid(1, 10.0, 201)
    assert grid.spacing == pytest.approx(0.1)
    assert grid.axis[0] == -10.0 and grid.axis[-1] == 10.0
    assert grid.axis[100] == 0.0
    assert Grid(2, 4.0, 17).points.shape == (2, 17, 17)


@pytest.mark.parametrize("args, error", [((1, 10.0, 200), DomainError), ((1, -1.0, 201), DomainError), ((3, 10.0, 33), UnsupportedError)])
def test_grid_rejects_bad_shapes(args, error):
    with pytest.raises(error):
        Grid(*args)


def test_field_rejects_non_finite(line_grid):
    values = np.zeros((1,) + line_grid.shape)
    values[0, 3] = math.nan
    with pytest.raises(DomainError):
        Field(line_grid, values)


def test_gaussian_weight_values():
    assert gaussian_weight([0.0]) == 1.0
    assert gaussian_weight([2.0]) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert gaussian_weight([2.0, 2.0]) == pytest.approx(math.exp(-2.0), rel=1e-15)


def test_lebesgue_norm_of_constant(line_grid):
    one = Field.constant(line_grid, [1.0])
    assert weighted_lebesgue_norm(Field.zeros(line_grid, 1), 2.0) == 0.0
    assert weighted_lebesgue_norm(one, 2.0) == pytest.approx(math.sqrt(SQRT_4PI), abs=1e-6)
    ball = math.sqrt(2.0 * math.sqrt(math.pi) * erf(0.5))
    assert weighted_lebesgue_norm(one, 2.0, region_radius=1.0) == pytest.approx(ball, abs=line_grid.spacing**2)


def test_ball_must_fit(line_grid):
    with pytest.raises(TruncationError):
        weighted_lebesgue_norm(Field.constant(line_grid, [1.0]), 2.0, region_radius=10.5)


def test_ball_weights_follow_cell_coverage(line_grid):
    weights = quadrature_weights(line_grid, 0.23)
    assert weights.sum() == pytest.approx(0.46, rel=1e-12)
    center = line_grid.points_per_axis // 2
    np.testing.assert_allclose(weights[center - 3 : center + 4], [0.0, 0.08, 0.1, 0.1, 0.1, 0.08, 0.0], atol=1e-13)
    jump = quadrature_weights(line_grid, 0.201).sum() - quadrature_weights(line_grid, 0.199).sum()
    assert jump == pytest.approx(0.004, rel=1e-9)


def test_ball_norm_nondecreasing_in_radius():
    grid = Grid(2, 6.0, 61)
    f = scalar_field(grid, np.cos(grid.points[0]) * np.exp(-grid.radius**2 / 8.0))
    norms = [weighted_lebesgue_norm(f, 3.0, R) for R in np.linspace(0.3, 6.0, 25)]
    assert all(a <= b + 1e-15 for a, b in zip(norms, norms[1:]))


def test_sobolev_norm_closed_forms(line_grid):
    beta = 0.5
    c = 1.7
    constant = Field.constant(line_grid, [c])
    assert weighted_sobolev_norm(constant, beta) == pytest.approx(math.sqrt(beta * c**2 * SQRT_4PI), abs=1e-6)
    ramp = scalar_field(line_grid, line_grid.axis)
    expected = math.sqrt(SQRT_4PI * (1.0 + 2.0 * beta))
    assert weighted_sobolev_norm(ramp, beta) == pytest.approx(expected, rel=1e-6)


def test_second_moment_quadrature(line_grid):
    assert weighted_integral(line_grid, line_grid.axis**2) == pytest.approx(2.0 * SQRT_4PI, rel=1e-8)


def test_difference_operators_on_polynomials(line_grid):
    constant = np.full((1,) + line_grid.shape, 3.0)
    assert np.max(np.abs(laplacian_values(constant, line_grid))) == 0.0
    assert np.max(np.abs(gradient_values(constant, line_grid))) == 0.0
    quadratic = (line_grid.axis**2)[np.newaxis]
    np.testing.assert_allclose(laplacian_values(quadratic, line_grid)[0, 1:-1], 2.0, atol=1e-8)


def test_laplacian_taylor_bound(line_grid):
    h = line_grid.spacing
    sine = np.sin(line_grid.axis)[np.newaxis]
    error = np.abs(laplacian_values(sine, line_grid)[0, 1:-1] + np.sin(line_grid.axis[1:-1]))
    assert error.max() <= h**2 / 12.0 + 1e-12


def test_boundary_closures_on_constant_data(line_grid):
    constant = np.full((2,) + line_grid.shape, 0.7)
    for closure in (None, "dirichlet", "neumann"):
        assert np.max(np.abs(laplacian_values(constant, line_grid, closure))) <= 1e-12
    with pytest.raises(DomainError):
        laplacian_values(constant, line_grid, "periodic")


def test_divergence_form_matches_drift_form():
    errors = []
    for n in (201, 401):
        grid = Grid(1, 10.0, n)
        w = np.cos(grid.axis)[np.newaxis]
        flux_form = weighted_divergence(Field(grid, w))
        drift_form = grid.rho * (laplacian_values(w, grid) - 0.5 * drift_values(w, grid))
        errors.append(np.max(np.abs(flux_form - drift_form)[0, 1:-1]))
    assert errors[0] < 1e-2
    assert errors[0] / errors[1] > 3.0


def test_cutoff_profile_values():
    profile = CutoffProfile(radius=2.0)
    assert cutoff_value(profile, [1.0]) == 1.0
    assert cutoff_value(profile, [6.0]) == 0.0
    assert cutoff_value(profile, [3.0]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        CutoffProfile(radius=0.0)


def test_cutoff_is_monotone_and_smooth():
    profile = CutoffProfile(radius=1.0)
    second_differences = []
    for n in (401, 801):
        grid = Grid(1, 3.0, n)
        values = cutoff_field(profile, grid)
        right = values[n // 2 :]
        assert np.all(np.diff(right) <= 1e-15)
        second_differences.append(np.max(np.abs(np.diff(right, 2))) / grid.spacing**2)
    assert second_differences[1] <= 1.1 * second_differences[0]


def test_cutoff_derivatives_match_differences():
    profile = CutoffProfile(radius=1.0)
    gradient_errors = []
    laplacian_errors = []
    for n in (3001, 6001):
        grid = Grid(1, 3.0, n)
        values = cutoff_field(profile, grid)[np.newaxis]
        gradient_errors.append(np.max(np.abs(gradient_values(values, grid)[0, 0] - cutoff_gradient(profile, grid)[0])))
        laplacian_errors.append(
            np.max(np.abs(laplacian_values(values, grid)[0, 1:-1] - cutoff_laplacian(profile, grid)[1:-1]))
        )
    assert gradient_errors[0] / gradient_errors[1] > 3.0
    assert laplacian_errors[0] / laplacian_errors[1] > 3.0


def test_sup_norm_uses_component_norm(line_grid):
    f = Field.constant(line_grid, [3.0, -4.0])
    assert sup_norm(f) == pytest.approx(5.0)


def test_interpolation_outside_grid(line_grid):
    f = scalar_field(line_grid, line_grid.axis)
    np.testing.assert_allclose(interpolate(f, np.array([[0.25, -3.05]])), [[0.25, -3.05]], atol=1e-12)
    with pytest.raises(TruncationError):
        interpolate(f, np.array([[10.5]]))


def test_field_file_round_trip(tmp_path):
    grid = Grid(2, 3.0, 17)
    f = Field(grid, np.stack([np.sin(grid.points[0]), np.cos(grid.points[1]) / 3.0]))
    path = write_field(tmp_path / "field.csv", f)
    assert path.read_text().splitlines()[0] == "2,2,17,3"
    restored = read_field(path)
    assert restored.grid == grid
    np.testing.assert_array_equal(restored.values, f.values)
