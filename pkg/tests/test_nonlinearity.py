import math
from fractions import Fraction

import numpy as np
import pytest

from core.errors import DomainError, UnsupportedError
from core.nonlinearity import (
    CouplingMatrix,
    SystemParams,
    check_structure,
    eval_F,
    eval_G,
    exponent_regime,
    sobolev_exponents,
    structure_constants,
)


def test_potential_hand_values(scalar_cubic, pair_ones):
    assert eval_G([2.0], scalar_cubic) == pytest.approx(4.0, rel=1e-15)
    assert eval_G([1.0, 1.0], pair_ones) == pytest.approx(1.0, rel=1e-15)
    assert eval_G([0.0, 0.0], pair_ones) == 0.0


def test_gradient_hand_values(scalar_cubic, pair_ones):
    np.testing.assert_allclose(eval_F([2.0], scalar_cubic), [8.0], rtol=1e-15)
    U = np.array([1.0, -1.0])
    F = eval_F(U, pair_ones)
    np.testing.assert_allclose(F, [2.0, -2.0], rtol=1e-15)
    assert float(U @ F) == pytest.approx((pair_ones.p + 1.0) * eval_G(U, pair_ones), rel=1e-15)


def test_gradient_vanishes_at_zero_component_for_small_r():
    params = SystemParams(space_dim=1, r=0.25, coupling=CouplingMatrix.ones(2))
    F = eval_F([0.0, 1.5], params)
    assert F[0] == 0.0
    assert np.all(np.isfinite(F))


def test_gradient_matches_finite_differences(pair_identity):
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(20):
        U = rng.uniform(0.2, 1.5, 2) * rng.choice([-1.0, 1.0], 2)
        numeric = [
            (eval_G(U + h * e, pair_identity) - eval_G(U - h * e, pair_identity)) / (2 * h)
            for e in np.eye(2)
        ]
        np.testing.assert_allclose(eval_F(U, pair_identity), numeric, rtol=1e-8)


def test_permutation_equivariance(pair_ones):
    U = np.array([0.3, -1.7])
    np.testing.assert_array_equal(eval_F(U[::-1], pair_ones), eval_F(U, pair_ones)[::-1])


def test_non_finite_state_rejected(scalar_cubic):
    with pytest.raises(DomainError):
        eval_G([math.nan], scalar_cubic)
    with pytest.raises(DomainError):
        eval_F([math.inf], scalar_cubic)


@pytest.mark.parametrize(
    "entries",
    [
        [[1.0, 0.5], [0.2, 1.0]],
        [[1.0, -0.1], [-0.1, 1.0]],
        [[0.0, 0.0], [0.0, 1.0]],
    ],
)
def test_coupling_invariants(entries):
    with pytest.raises(DomainError):
        CouplingMatrix(np.array(entries))


@pytest.mark.parametrize(
    "params",
    [
        SystemParams.scalar(1, 3.0),
        SystemParams(space_dim=1, r=1.0, coupling=CouplingMatrix.ones(2)),
        SystemParams(space_dim=1, r=0.5, coupling=CouplingMatrix.identity(2)),
    ],
)
def test_structure_identities_hold(params):
    report = check_structure(params, sample_count=1000, seed=0)
    assert report.status == "pass", report.checks_failed
    for name in ("G_homogeneity", "F_homogeneity", "euler_identity"):
        assert report.residuals[name] <= 1e-12


def test_structure_report_names_its_residuals(scalar_cubic):
    report = check_structure(scalar_cubic, sample_count=50, seed=1)
    assert set(report.residuals) == {
        "G_homogeneity",
        "F_homogeneity",
        "euler_identity",
        "F_upper_bound",
        "G_lower_bound",
        "G_upper_bound",
    }
    assert len(report.checks_passed) + len(report.checks_failed) == len(report.residuals)


@pytest.mark.parametrize(
    "coupling, c_G, C_F",
    [
        (CouplingMatrix.ones(1), 0.25, 1.0),
        (CouplingMatrix.ones(2), 0.25, 1.0),
        (CouplingMatrix.identity(2), 0.125, 1.0),
    ],
)
def test_sphere_constants(coupling, c_G, C_F):
    constants = structure_constants(SystemParams(space_dim=1, r=1.0, coupling=coupling))
    assert constants.c_G == pytest.approx(c_G, abs=1e-6)
    assert constants.C_F == pytest.approx(C_F, abs=1e-6)


def test_sphere_constants_reject_many_components():
    params = SystemParams(space_dim=1, r=1.0, coupling=CouplingMatrix.ones(5))
    with pytest.raises(UnsupportedError):
        structure_constants(params)


def test_sobolev_exponents():
    p_s, p_b = sobolev_exponents(3)
    assert (p_s.value, p_b.value) == (Fraction(5), Fraction(15, 4))
    p_s, p_b = sobolev_exponents(4)
    assert (p_s.value, p_b.value) == (Fraction(3), Fraction(8, 3))
    p_s, p_b = sobolev_exponents(1)
    assert p_s.is_infinite and p_b.is_infinite
    with pytest.raises(DomainError):
        sobolev_exponents(0)


def test_exponent_regime():
    assert exponent_regime(3.0, 3) == "nonnegative_liouville"
    assert exponent_regime(4.0, 3) == "sign_changing_only"
    assert exponent_regime(5.0, 3) == "supercritical"
    assert exponent_regime(7.0, 1) == "nonnegative_liouville"


def test_subcritical_requirement():
    SystemParams(space_dim=3, r=1.5, coupling=CouplingMatrix.ones(1)).require_subcritical()
    with pytest.raises(DomainError):
        SystemParams(space_dim=3, r=2.0, coupling=CouplingMatrix.ones(1)).require_subcritical()
