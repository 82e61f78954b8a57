import numpy as np
import pytest

from core.errors import DomainError
from core.grid import Field
from diagnostics.subsolution import (
    aggregate_w,
    bump_family,
    component_part_residual,
    pointwise_residual,
    subsolution_residual,
)
from solvers.selfsimilar import RescaledTrajectory


def negate_second_component(traj):
    flip = np.array([1.0, -1.0])[:, None]
    frames = [frame.with_field(Field(frame.grid, flip * frame.W.values), frame.s) for frame in traj]
    return RescaledTrajectory(frames=frames, ds=traj.ds, frame_every=traj.frame_every)


def test_aggregate_w(line_grid):
    W = Field(line_grid, np.stack([np.full(201, -0.5), np.full(201, 0.25)]))
    np.testing.assert_allclose(aggregate_w(W).values, 0.75)


def test_bump_family(line_grid):
    bumps = bump_family(line_grid)
    assert len(bumps) == 9
    assert sorted({b.center for b in bumps}) == [(-2.0,), (0.0,), (2.0,)]
    assert min(b.radius for b in bumps) == pytest.approx(0.5)
    assert max(b.radius for b in bumps) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        bump_family(line_grid, 4)


def test_equal_component_slack(perturbed_pair_run, pair_ones, line_grid):
    j = len(perturbed_pair_run) // 2
    r = pointwise_residual(perturbed_pair_run, j, pair_ones)
    u = perturbed_pair_run[j].W.values[0]
    near = np.abs(line_grid.axis) <= 3.0
    np.testing.assert_allclose(r[near], -28.0 * u[near] ** 3, rtol=5e-2)
    assert r[0] == r[-1] == 0.0
    with pytest.raises(DomainError):
        pointwise_residual(perturbed_pair_run, 0, pair_ones)


@pytest.mark.parametrize("run", ["perturbed_pair_run", "stationary_pair_run"])
def test_aggregate_is_a_subsolution(run, pair_ones, request):
    traj = request.getfixturevalue(run)
    report = subsolution_residual(traj, pair_ones)
    assert report.status == "pass"
    assert not report.mask_empty
    assert report.pointwise_max < 0.0
    assert len(report.weak) == 9
    assert report.weak_max <= report.tolerance
    assert report.to_dict()["checks_failed"] == []


def test_identity_coupling_is_a_subsolution(pair_identity, kappa_runner, line_grid):
    traj = kappa_runner(pair_identity, line_grid, ds=5e-3, s_span=1.0, frame_every=2)
    report = subsolution_residual(traj, pair_identity)
    assert report.status == "pass"


def test_subsolution_ignores_component_signs(perturbed_pair_run, pair_ones):
    base = subsolution_residual(perturbed_pair_run, pair_ones)
    flipped = subsolution_residual(negate_second_component(perturbed_pair_run), pair_ones)
    assert flipped.pointwise_max == base.pointwise_max
    assert [w.max_residual for w in flipped.weak] == [w.max_residual for w in base.weak]


def test_empty_mask_skips_pointwise_check(stationary_pair_run, pair_ones):
    report = subsolution_residual(stationary_pair_run, pair_ones, exclusion=10.0)
    assert report.mask_empty
    assert report.pointwise_witness is None
    assert "pointwise" in report.checks_passed


def test_subsolution_arguments(perturbed_pair_run, pair_ones):
    with pytest.raises(DomainError):
        subsolution_residual(perturbed_pair_run, pair_ones, exclusion=-1.0)
    short = RescaledTrajectory(frames=perturbed_pair_run.frames[:2], ds=perturbed_pair_run.ds)
    with pytest.raises(DomainError):
        subsolution_residual(short, pair_ones)


def test_sign_parts(perturbed_pair_run, pair_ones):
    parts = component_part_residual(perturbed_pair_run, pair_ones)
    assert [(p.component, p.sign) for p in parts] == [(0, "+"), (0, "-"), (1, "+"), (1, "-")]
    assert all(p.passed for p in parts)
    flipped = component_part_residual(negate_second_component(perturbed_pair_run), pair_ones)
    assert flipped[2].max_residual == pytest.approx(parts[3].max_residual, abs=1e-14)
    assert flipped[3].max_residual == pytest.approx(parts[2].max_residual, abs=1e-14)
