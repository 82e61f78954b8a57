"""
Energies and Energy Identities
==============================

Global and localized energies of rescaled fields and discrete checks of
the mass and dissipation identities satisfied along rescaled trajectories.

Time derivatives of frame quantities are central differences over the
stored frames; the flow W_s itself always comes from ``rhs_rescaled``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import DEFAULT_IDENTITY_TOLERANCE_FACTOR
from core.errors import DomainError
from core.grid import (
    Closure,
    CutoffProfile,
    Field,
    cutoff_field,
    cutoff_gradient,
    gradient_values,
    require_support,
    weighted_integral,
    weighted_lebesgue_norm,
    weighted_sobolev_norm,
)
from core.nonlinearity import SystemParams, eval_G
from solvers.selfsimilar import RescaledTrajectory, rhs_rescaled

logger = logging.getLogger(__name__)

# Residual ratio expected when (h, ds) are halved for a second-order scheme
CONVERGENCE_RATIO = 3.5

# Residuals below this level are roundoff and carry no convergence information
RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class EnergySample:
    """Per-frame energy quantities."""

    s: float
    E: float
    E_loc: float
    l2rho: float
    w12rho: float
    lp1rho_ball: float
    dissipation: float

    def __post_init__(self) -> None:
        if self.dissipation < 0:
            raise DomainError(f"Dissipation must be nonnegative, got {self.dissipation}")


@dataclass
class IdentityReport:
    """
    Discrete residual of one energy identity at the interior frames.

    Attributes:
        name: Identity name.
        s: Frame times where both sides were evaluated.
        lhs: Central-difference time derivative.
        rhs: Right side evaluated from the frame.
        frame_spacing: Spacing of the frames in s.
        grid_spacing: Grid spacing h.
        tolerance: Pass bar, factor * (h^2 + ds^2) * scale.
    """

    name: str
    s: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    frame_spacing: float
    grid_spacing: float
    tolerance: float

    @property
    def residuals(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    @property
    def witness_s(self) -> float:
        return float(self.s[int(np.argmax(np.abs(self.residuals)))])

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "max_residual": self.max_residual,
            "witness_s": self.witness_s,
            "tolerance": self.tolerance,
            "frame_spacing": self.frame_spacing,
            "grid_spacing": self.grid_spacing,
            "frames": int(self.s.size),
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    """Residual ratio between a coarse and a refined run of the same identity."""

    name: str
    coarse_residual: float
    fine_residual: float
    ratio: float
    order: float
    status: str

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


# ----------------------------------------------------------------------
# Energies
# ----------------------------------------------------------------------
def _gradient_squared(W: Field) -> np.ndarray:
    grad = gradient_values(W.values, W.grid)
    return np.sum(grad**2, axis=(0, 1))


def _energy_density(W: Field, params: SystemParams) -> np.ndarray:
    kinetic = _gradient_squared(W) + params.beta_exp * np.sum(W.values**2, axis=0)
    return 0.5 * kinetic - eval_G(W.values, params)


def global_energy(W: Field, params: SystemParams) -> float:
    """E[W] = 1/2 ∫(|∇W|^2 + β|W|^2)ρ - ∫G(W)ρ under grid quadrature."""
    return weighted_integral(W.grid, _energy_density(W, params))


def local_energy(W: Field, cutoff: CutoffProfile, params: SystemParams) -> float:
    """
    E_φ[W] = 1/2 ∫φ^2(|∇W|^2 + β|W|^2)ρ - ∫φ^2 G(W)ρ.

    Raises:
        TruncationError: if the cutoff support leaves the grid.
    """
    require_support(cutoff, W.grid)
    phi = cutoff_field(cutoff, W.grid)
    return weighted_integral(W.grid, _energy_density(W, params), weight=phi**2)


def potential_integral(W: Field, params: SystemParams, weight: Optional[np.ndarray] = None) -> float:
    """∫G(W)ρ, optionally against an extra nodal weight."""
    return weighted_integral(W.grid, eval_G(W.values, params), weight=weight)


def weighted_mass(W: Field, weight: Optional[np.ndarray] = None) -> float:
    """1/2 ∫|W|^2 ρ, optionally against an extra nodal weight."""
    return 0.5 * weighted_integral(W.grid, np.sum(W.values**2, axis=0), weight=weight)


def dissipation(W: Field, params: SystemParams, closure: Closure = "dirichlet") -> float:
    """∫|W_s|^2 ρ with W_s from the discrete right side."""
    W_s = rhs_rescaled(W, params, closure).values
    return weighted_integral(W.grid, np.sum(W_s**2, axis=0))


def energy_samples(
    traj: RescaledTrajectory,
    params: SystemParams,
    cutoff: CutoffProfile,
    ball_radius: float,
    closure: Closure = "dirichlet",
) -> List[EnergySample]:
    samples = []
    for frame in traj:
        W = frame.W
        samples.append(
            EnergySample(
                s=frame.s,
                E=global_energy(W, params),
                E_loc=local_energy(W, cutoff, params),
                l2rho=weighted_lebesgue_norm(W, 2.0),
                w12rho=weighted_sobolev_norm(W, params.beta_exp),
                lp1rho_ball=weighted_lebesgue_norm(W, params.p + 1.0, ball_radius),
                dissipation=dissipation(W, params, closure),
            )
        )
    return samples


def energy_table(
    traj: RescaledTrajectory,
    params: SystemParams,
    cutoff: CutoffProfile,
    ball_radius: float,
    closure: Closure = "dirichlet",
) -> pd.DataFrame:
    """Per-frame table with columns s, E, E_loc, l2rho, w12rho, lp1rho_ball, dissipation."""
    rows = [asdict(sample) for sample in energy_samples(traj, params, cutoff, ball_radius, closure)]
    return pd.DataFrame(rows, columns=["s", "E", "E_loc", "l2rho", "w12rho", "lp1rho_ball", "dissipation"])


# ----------------------------------------------------------------------
# Identities
# ----------------------------------------------------------------------
def _require_frames(traj: RescaledTrajectory) -> float:
    if len(traj) < 3:
        raise DomainError(f"Identity checks need at least 3 frames, got {len(traj)}")
    return traj.uniform_spacing()


def _central_difference(series: np.ndarray, spacing: float) -> np.ndarray:
    return (series[2:] - series[:-2]) / (2.0 * spacing)


def _build_report(
    name: str,
    traj: RescaledTrajectory,
    spacing: float,
    lhs: np.ndarray,
    rhs: np.ndarray,
    tolerance_factor: float,
) -> IdentityReport:
    h = traj.grid.spacing
    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    tolerance = tolerance_factor * (h**2 + spacing**2) * scale
    report = IdentityReport(
        name=name,
        s=traj.s[1:-1],
        lhs=lhs,
        rhs=rhs,
        frame_spacing=spacing,
        grid_spacing=h,
        tolerance=tolerance,
    )
    logger.info(
        f"[EnergyIdentities] {name}: max residual {report.max_residual:.3e} at s={report.witness_s:.4g} "
        f"(tolerance {tolerance:.3e})"
    )
    return report


def check_identity_mass(
    traj: RescaledTrajectory,
    params: SystemParams,
    tolerance_factor: float = DEFAULT_IDENTITY_TOLERANCE_FACTOR,
) -> IdentityReport:
    """
    Residual of 1/2 d/ds ∫|W|^2 ρ = -2E + (p-1)∫G(W)ρ.

    Raises:
        ResamplingError: if the frames are not uniformly spaced.
    """
    spacing = _require_frames(traj)
    mass = np.array([weighted_mass(frame.W) for frame in traj])
    rhs = np.array(
        [
            -2.0 * global_energy(frame.W, params) + (params.p - 1.0) * potential_integral(frame.W, params)
            for frame in traj.frames[1:-1]
        ]
    )
    return _build_report("mass", traj, spacing, _central_difference(mass, spacing), rhs, tolerance_factor)


def check_identity_dissipation(
    traj: RescaledTrajectory,
    params: SystemParams,
    closure: Closure = "dirichlet",
    tolerance_factor: float = DEFAULT_IDENTITY_TOLERANCE_FACTOR,
) -> IdentityReport:
    """Residual of dE/ds = -∫|W_s|^2 ρ with W_s from ``rhs_rescaled``."""
    spacing = _require_frames(traj)
    energies = np.array([global_energy(frame.W, params) for frame in traj])
    rhs = np.array([-dissipation(frame.W, params, closure) for frame in traj.frames[1:-1]])
    return _build_report(
        "dissipation", traj, spacing, _central_difference(energies, spacing), rhs, tolerance_factor
    )


def _coupling_term(W: Field, psi: np.ndarray, grad_psi: np.ndarray, values: np.ndarray) -> float:
    """Σ_i ∫ψ v_i (∇w_i . ∇ψ) ρ for v = ``values``."""
    grad_w = gradient_values(W.values, W.grid)
    directional = np.einsum("km...,k...->m...", grad_w, grad_psi)
    return weighted_integral(W.grid, np.sum(values * directional, axis=0), weight=psi)


def check_local_identities(
    traj: RescaledTrajectory,
    cutoff: CutoffProfile,
    params: SystemParams,
    closure: Closure = "dirichlet",
    tolerance_factor: float = DEFAULT_IDENTITY_TOLERANCE_FACTOR,
) -> Tuple[IdentityReport, IdentityReport]:
    """
    Residuals of the localized mass and energy identities for the cutoff ψ:

        1/2 d/ds ∫ψ^2|W|^2ρ = -2E_ψ + (p-1)∫ψ^2 G ρ - 2Σ∫ψ w_i ∇ψ.∇w_i ρ
        d/ds E_ψ = -∫ψ^2|W_s|^2ρ - 2Σ∫ψ w_is (∇w_i.∇ψ) ρ

    Returns:
        (local mass report, local energy report).
    """
    spacing = _require_frames(traj)
    grid = traj.grid
    require_support(cutoff, grid)
    psi = cutoff_field(cutoff, grid)
    grad_psi = cutoff_gradient(cutoff, grid)

    masses = np.array([weighted_mass(frame.W, weight=psi**2) for frame in traj])
    energies = np.array([local_energy(frame.W, cutoff, params) for frame in traj])

    mass_rhs = []
    energy_rhs = []
    for j, frame in enumerate(traj.frames[1:-1], start=1):
        W = frame.W
        W_s = rhs_rescaled(W, params, closure).values
        mass_rhs.append(
            -2.0 * energies[j]
            + (params.p - 1.0) * potential_integral(W, params, weight=psi**2)
            - 2.0 * _coupling_term(W, psi, grad_psi, W.values)
        )
        energy_rhs.append(
            -weighted_integral(grid, np.sum(W_s**2, axis=0), weight=psi**2)
            - 2.0 * _coupling_term(W, psi, grad_psi, W_s)
        )

    mass_report = _build_report(
        "local_mass", traj, spacing, _central_difference(masses, spacing), np.array(mass_rhs), tolerance_factor
    )
    energy_report = _build_report(
        "local_dissipation",
        traj,
        spacing,
        _central_difference(energies, spacing),
        np.array(energy_rhs),
        tolerance_factor,
    )
    return mass_report, energy_report


def convergence_order(
    coarse: IdentityReport,
    fine: IdentityReport,
    threshold: float = CONVERGENCE_RATIO,
) -> ConvergenceReport:
    """
    Compare the residual of one identity on a coarse run and a run with (h, ds) halved.

    Status is "inconclusive" when both residuals sit at roundoff level.
    """
    if coarse.name != fine.name:
        raise DomainError(f"Cannot compare residuals of '{coarse.name}' and '{fine.name}'")
    a, b = coarse.max_residual, fine.max_residual
    if max(a, b) <= RESIDUAL_FLOOR:
        return ConvergenceReport(coarse.name, a, b, math.nan, math.nan, "inconclusive")
    ratio = a / b if b > 0 else math.inf
    order = math.log2(ratio) if 0 < ratio < math.inf else math.inf
    status = "pass" if ratio >= threshold else "fail"
    logger.info(f"[EnergyIdentities] {coarse.name}: residual ratio {ratio:.3f} (order {order:.2f}) -> {status}")
    return ConvergenceReport(coarse.name, a, b, ratio, order, status)
