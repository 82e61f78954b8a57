"""Shared benchmark systems, grids and rescaled trajectories."""

import numpy as np
import pytest

from core.grid import Field, Grid
from core.nonlinearity import CouplingMatrix, SystemParams
from solvers.selfsimilar import SelfSimilarFrame, evolve_rescaled, kappa_constant


@pytest.fixture(scope="session")
def scalar_cubic():
    """M=1, r=1 (p=3), N=1."""
    return SystemParams.scalar(1, 3.0)


@pytest.fixture(scope="session")
def pair_ones():
    """M=2, r=1, all-ones coupling, N=1."""
    return SystemParams(space_dim=1, r=1.0, coupling=CouplingMatrix.ones(2))


@pytest.fixture(scope="session")
def pair_identity():
    """M=2, r=1, identity coupling, N=1."""
    return SystemParams(space_dim=1, r=1.0, coupling=CouplingMatrix.identity(2))


@pytest.fixture(scope="session")
def line_grid():
    return Grid(1, 10.0, 201)


def perturbed_kappa_run(params, grid, ds, s_span, frame_every=1, epsilon=0.1):
    """kappa (1 - eps e^(-|y|^2)) evolved from s = 0."""
    kappa = kappa_constant(params).reshape((-1,) + (1,) * grid.space_dim)
    W0 = Field(grid, kappa * (1.0 - epsilon * np.exp(-grid.radius**2)))
    frame = SelfSimilarFrame((0.0,) * grid.space_dim, 1.0, 0.0, W0)
    return evolve_rescaled(frame, ds, s_span, params, frame_every=frame_every)


@pytest.fixture(scope="session")
def perturbed_pair_run(pair_ones, line_grid):
    """M=2 perturbed-kappa trajectory over s in [0, 2.5], frames every 0.01."""
    return perturbed_kappa_run(pair_ones, line_grid, ds=5e-3, s_span=2.5, frame_every=2)


@pytest.fixture(scope="session")
def stationary_pair_run(pair_ones, line_grid):
    kappa = kappa_constant(pair_ones)
    frame = SelfSimilarFrame((0.0,), 1.0, 0.0, Field.constant(line_grid, kappa))
    return evolve_rescaled(frame, 5e-3, 2.5, pair_ones, frame_every=2)


@pytest.fixture(scope="session")
def kappa_runner():
    return perturbed_kappa_run
