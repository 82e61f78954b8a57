import numpy as np
import pytest

from core.errors import DomainError, WindowError
from core.grid import Field, Grid
from core.nonlinearity import structure_constants
from diagnostics.monitors import initial_energy_bound, jensen_constant, monitor_bounds, sliding_window_integrals
from solvers.selfsimilar import RescaledTrajectory


def test_sliding_window_integrals():
    s = np.linspace(0.0, 3.0, 7)
    starts, windows = sliding_window_integrals(s, np.ones_like(s), 0.5)
    np.testing.assert_allclose(starts, s[:5])
    np.testing.assert_allclose(windows, 1.0, rtol=1e-14)

    starts, windows = sliding_window_integrals(s, s, 0.5)
    np.testing.assert_allclose(windows, starts + 0.5, rtol=1e-14)


def test_sliding_window_needs_one_unit_of_s():
    with pytest.raises(WindowError):
        sliding_window_integrals(np.array([0.0, 0.5]), np.ones(2), 0.5)


def test_stationary_run_passes_all_monitors(stationary_pair_run, pair_ones):
    report = monitor_bounds(stationary_pair_run, 2.0, 2.0, pair_ones, constants=structure_constants(pair_ones))
    assert report.passed
    assert set(report.flags) == {
        "energy_nonincreasing",
        "energy_nonnegative",
        "dissipation_bounded",
        "jensen_lower_bound",
    }
    assert report.cutoff_radius == 1.0
    assert report.quantities["cumulative_dissipation"].value < 1e-12
    assert report.quantities["min_energy"].value == pytest.approx(report.quantities["max_energy"].value, rel=1e-10)


@pytest.mark.parametrize("q", [2.0, 3.0])
def test_perturbed_run_passes_monitors(perturbed_pair_run, pair_ones, q):
    report = monitor_bounds(perturbed_pair_run, 2.0, q, pair_ones, constants=structure_constants(pair_ones))
    assert report.status == "pass"
    assert report.quantities["window_ball_lp1"].value > 0.0
    assert report.quantities["sup_l2rho"].s == pytest.approx(0.0)
    assert report.to_dict()["q"] == q


def test_monitor_witnesses_lie_on_frames(perturbed_pair_run, pair_ones):
    report = monitor_bounds(perturbed_pair_run, 3.0, 2.0, pair_ones)
    s = perturbed_pair_run.s
    for name, witness in report.quantities.items():
        assert np.min(np.abs(s - witness.s)) < 1e-12, name
    assert "jensen_lower_bound" not in report.flags


def test_jensen_constant(pair_ones):
    c1 = jensen_constant(pair_ones, structure_constants(pair_ones))
    assert c1 == pytest.approx(2.0 * 0.25 / np.sqrt(4.0 * np.pi), rel=1e-6)


def test_monitors_need_two_units_of_s(perturbed_pair_run, pair_ones):
    short = RescaledTrajectory(frames=perturbed_pair_run.frames[:151], ds=perturbed_pair_run.ds, frame_every=2)
    with pytest.raises(WindowError):
        monitor_bounds(short, 2.0, 2.0, pair_ones)
    with pytest.raises(DomainError):
        monitor_bounds(perturbed_pair_run, 2.0, 1.5, pair_ones)


def test_initial_energy_bound(scalar_cubic):
    grid = Grid(1, 20.0, 401)
    U0 = Field.constant(grid, [0.5])
    bound = initial_energy_bound(U0, [(0.0,), (2.0,)], 1.0, scalar_cubic)
    expected = (0.5 * 0.5 * 0.25 - 0.0625 / 4.0) * np.sqrt(4.0 * np.pi)
    assert bound.M0 == pytest.approx(expected, rel=1e-6)
    assert len(bound.per_center) == 2
    assert bound.M0 <= bound.crude_bound


def test_initial_energy_bound_of_bump(scalar_cubic):
    grid = Grid(1, 20.0, 801)
    U0 = Field(grid, 1.5 * np.exp(-grid.axis**2)[None])
    bound = initial_energy_bound(U0, [(-1.0,), (0.0,), (1.0,)], 0.5, scalar_cubic)
    assert bound.M0 <= bound.crude_bound
    assert bound.to_dict()["per_center"][1]["center"] == [0.0]
    with pytest.raises(DomainError):
        initial_energy_bound(U0, [], 0.5, scalar_cubic)
