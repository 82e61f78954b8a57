import math

import numpy as np
import pytest

from core.errors import DomainError, FitWindowError, TruncationError
from core.grid import Field, Grid
from core.nonlinearity import CouplingMatrix, SystemParams, structure_constants
from solvers.physical import (
    OUTCOME_BLOWUP,
    OUTCOME_NO_BLOWUP,
    PhysicalState,
    SolverControls,
    Trajectory,
    estimate_blowup_time,
    fit_rate,
    rhs_physical,
    run_to_blowup,
    similarity_denormalize,
    similarity_normalize,
    stability_limit,
    step,
)

ODE_GRID = Grid(1, 1.0, 17)
ODE_CONTROLS = SolverControls(dt_init=1e-4, threshold=1e6, t_max=1.0, boundary="neumann")


def exact_trajectory(p, T=0.5, tau_min=1e-9, count=400):
    """Samples of the closed-form ODE solution u = ((p-1)(T-t))^(-1/(p-1))."""
    tau = np.geomspace(T, tau_min, count)
    times = T - tau
    sups = ((p - 1.0) * tau) ** (-1.0 / (p - 1.0))
    dts = np.concatenate([[0.0], np.diff(times)])
    return Trajectory(times, sups, dts, outcome=OUTCOME_BLOWUP)


def test_rhs_of_zero_and_constant_states(pair_ones, line_grid):
    zero = PhysicalState(0.0, Field.zeros(line_grid, 2))
    assert np.max(np.abs(rhs_physical(zero, pair_ones).values)) == 0.0
    constant = PhysicalState(0.0, Field.constant(line_grid, [0.5, -1.0]))
    rate = rhs_physical(constant, pair_ones).values
    expected = np.array([0.5 * (0.25 + 1.0), -1.0 * (0.25 + 1.0)])
    np.testing.assert_allclose(rate[:, 1:-1], np.broadcast_to(expected[:, None], rate[:, 1:-1].shape), rtol=1e-14)
    assert np.all(rate[:, [0, -1]] == 0.0)


def test_rhs_of_sine_profile(scalar_cubic, line_grid):
    x = line_grid.axis
    state = PhysicalState(0.0, Field(line_grid, np.sin(x)[None]))
    rate = rhs_physical(state, scalar_cubic).values[0, 1:-1]
    exact = -np.sin(x[1:-1]) + np.sin(x[1:-1]) ** 3
    assert np.max(np.abs(rate - exact)) <= line_grid.spacing**2 / 12.0 + 1e-12


def test_neumann_closure_keeps_constants_spatially_flat(scalar_cubic, line_grid):
    rate = rhs_physical(PhysicalState(0.0, Field.constant(line_grid, [-0.5])), scalar_cubic, closure="neumann").values
    np.testing.assert_allclose(rate[0], -0.125, rtol=1e-14)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.7])
def test_scaling_equivariance_on_constants(scalar_cubic, lam):
    U = Field.constant(ODE_GRID, [0.8])
    scaled = Field.constant(ODE_GRID, [lam * 0.8])
    base = rhs_physical(PhysicalState(0.0, U), scalar_cubic, "neumann").values
    rate = rhs_physical(PhysicalState(0.0, scaled), scalar_cubic, "neumann").values
    np.testing.assert_allclose(rate, lam**3 * base, rtol=1e-14)


def test_step_keeps_zero_state(scalar_cubic):
    state = PhysicalState(0.0, Field.zeros(ODE_GRID, 1))
    new = step(state, 1e-4, scalar_cubic)
    assert new.t == pytest.approx(1e-4)
    assert np.max(np.abs(new.U.values)) == 0.0


def test_step_matches_closed_form(scalar_cubic):
    state = PhysicalState(0.0, Field.constant(ODE_GRID, [1.0]))
    new = step(state, 1e-4, scalar_cubic, closure="neumann")
    exact = (2.0 * (0.5 - 1e-4)) ** -0.5
    np.testing.assert_allclose(new.U.values, exact, rtol=1e-14)


def test_step_rejects_unstable_dt(scalar_cubic, line_grid):
    state = PhysicalState(0.0, Field.zeros(line_grid, 1))
    with pytest.raises(DomainError):
        step(state, 2.0 * stability_limit(line_grid), scalar_cubic)
    with pytest.raises(DomainError):
        step(state, 0.0, scalar_cubic)


def test_small_data_decays(scalar_cubic, line_grid):
    state = PhysicalState(0.0, Field(line_grid, 0.01 * np.exp(-line_grid.axis**2)[None]))
    dt = 0.9 * stability_limit(line_grid)
    new = step(state, dt, scalar_cubic)
    assert np.max(np.abs(new.U.values)) <= np.max(np.abs(state.U.values))


def test_ode_mode_blowup_time(scalar_cubic):
    traj, estimate = run_to_blowup(Field.constant(ODE_GRID, [1.0]), scalar_cubic, ODE_CONTROLS)
    assert traj.outcome == OUTCOME_BLOWUP
    assert traj.sup_norms[-1] >= 1e6
    assert estimate.T_est == pytest.approx(0.5, rel=1e-2)
    assert estimate.fit_window[1] < estimate.T_est
    rate = fit_rate(traj, estimate.T_est, scalar_cubic)
    assert rate.exponent == pytest.approx(0.5, abs=1e-3)
    assert rate.plateau == pytest.approx(2**-0.5, abs=1e-3)


def test_equal_component_ode_blowup_time(pair_ones):
    traj, estimate = run_to_blowup(Field.constant(ODE_GRID, [1.0, 1.0]), pair_ones, ODE_CONTROLS)
    assert traj.blew_up
    assert estimate.T_est == pytest.approx(0.25, rel=1e-2)


def test_larger_data_blows_up_sooner(scalar_cubic):
    times = []
    for amplitude in (1.0, 1.5):
        _, estimate = run_to_blowup(Field.constant(ODE_GRID, [amplitude]), scalar_cubic, ODE_CONTROLS)
        times.append(estimate.T_est)
    assert times[1] <= times[0]
    assert times[1] == pytest.approx(1.0 / (2.0 * 1.5**2), rel=1e-2)


def test_zero_data_reports_no_blowup(pair_ones, line_grid):
    traj, estimate = run_to_blowup(Field.zeros(line_grid, 2), pair_ones)
    assert estimate is None
    assert traj.outcome == OUTCOME_NO_BLOWUP
    assert not traj.blew_up
    assert len(traj) == 1


def test_symmetric_components_stay_identical(pair_ones, line_grid):
    bump = 0.8 * np.exp(-line_grid.axis**2)
    controls = SolverControls(dt_init=1e-3, t_max=0.05, snapshot_every=10)
    traj, _ = run_to_blowup(Field(line_grid, np.stack([bump, bump])), pair_ones, controls)
    for _, snapshot in traj.snapshots:
        np.testing.assert_array_equal(snapshot.values[0], snapshot.values[1])
    assert traj.snapshots[-1][0] == pytest.approx(0.05)


def test_trajectory_table(scalar_cubic):
    traj, _ = run_to_blowup(Field.constant(ODE_GRID, [1.0]), scalar_cubic, ODE_CONTROLS)
    table = traj.to_frame()
    assert list(table.columns) == ["t", "sup_norm", "dt"]
    assert len(table) == len(traj)
    assert np.all(np.diff(table["t"]) > 0)


def test_gaussian_blowup_time_stable_under_refinement(scalar_cubic):
    estimates = []
    for n in (321, 641):
        grid = Grid(1, 8.0, n)
        U0 = Field(grid, 3.0 * np.exp(-grid.axis**2)[None])
        _, estimate = run_to_blowup(U0, scalar_cubic, SolverControls(dt_init=1e-4, t_max=1.0))
        estimates.append(estimate.T_est)
    assert estimates[1] == pytest.approx(estimates[0], rel=2e-2)


@pytest.mark.parametrize("p, exponent, plateau", [(3.0, 0.5, 2**-0.5), (2.0, 1.0, 1.0)])
def test_rate_fit_on_exact_trajectories(p, exponent, plateau):
    params = SystemParams.scalar(1, p)
    constants = structure_constants(params)
    fit = fit_rate(exact_trajectory(p), 0.5, params, constants=constants)
    assert fit.exponent == pytest.approx(exponent, abs=1e-3)
    assert fit.plateau == pytest.approx(plateau, abs=1e-3)
    assert fit.plateau_variation < 1e-9
    assert fit.lower_bound == pytest.approx(plateau, rel=1e-12)
    assert fit.lower_bound_ok


def test_blowup_time_extrapolation_on_exact_trajectory(scalar_cubic):
    estimate = estimate_blowup_time(exact_trajectory(3.0), scalar_cubic)
    assert estimate.T_est == pytest.approx(0.5, abs=1e-9)


def test_rate_fit_needs_enough_samples(scalar_cubic):
    with pytest.raises(FitWindowError):
        fit_rate(exact_trajectory(3.0, count=15), 0.5, scalar_cubic)
    with pytest.raises(FitWindowError):
        fit_rate(exact_trajectory(3.0, tau_min=0.2, count=200), 0.5, scalar_cubic, window=(0.0, 0.3))


def test_similarity_normalization(scalar_cubic):
    grid = Grid(1, 10.0, 401)
    bump = Field(grid, np.exp(-grid.axis**2)[None])
    same = similarity_normalize(bump, 1.0, scalar_cubic)
    np.testing.assert_allclose(same.values, bump.values, atol=1e-14)

    constant = similarity_normalize(Field.constant(grid, [1.3]), 4.0, scalar_cubic)
    np.testing.assert_allclose(constant.values, 2.6, rtol=1e-14)

    Z = similarity_normalize(bump, 0.25, scalar_cubic)
    back = similarity_denormalize(Z, 0.25, scalar_cubic)
    assert back.grid == grid
    assert np.max(np.abs(back.values - bump.values)) < 5e-3

    with pytest.raises(TruncationError):
        similarity_normalize(bump, 4.0, scalar_cubic, target=grid)
    with pytest.raises(DomainError):
        similarity_normalize(bump, 0.0, scalar_cubic)


@pytest.mark.slow
def test_pde_type_one_rate():
    params = SystemParams(space_dim=1, r=1.0, coupling=CouplingMatrix.ones(2))
    grid = Grid(1, 16.0, 2049)
    bump = 3.0 * np.exp(-grid.axis**2)
    traj, estimate = run_to_blowup(Field(grid, np.stack([bump, bump])), params, SolverControls(dt_init=1e-4, t_max=2.0))
    assert traj.blew_up
    fit = fit_rate(traj, estimate.T_est, params)
    assert fit.exponent == pytest.approx(0.5, rel=5e-2)
    assert fit.plateau_variation < 0.1
    assert math.isfinite(fit.misfit)
