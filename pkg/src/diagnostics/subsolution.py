"""
Subsolution Checks
==================

The aggregate w = Σ|w_i| of a rescaled trajectory should satisfy, weakly,

    w_s ≤ Δw - y/2 . ∇w - βw + (Σ_ij β_ij) w^p.

Two diagnostics are provided: a pointwise residual on the region where
every component stays away from zero, and a weak residual tested against
a family of nonnegative smooth bumps with all derivatives moved onto the
bump. The same weak test is applied to the positive and negative parts
of each component.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_BUMP_COUNT, DEFAULT_IDENTITY_TOLERANCE_FACTOR, DEFAULT_MASK_FRACTION
from core.errors import DomainError
from core.grid import (
    CutoffProfile,
    Field,
    Grid,
    cutoff_field,
    cutoff_gradient,
    cutoff_laplacian,
    drift_values,
    laplacian_values,
    require_support,
    weighted_integral,
)
from core.nonlinearity import SystemParams
from solvers.selfsimilar import RescaledTrajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nonnegative grid function."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.shape != self.grid.shape:
            raise DomainError(f"Scalar field must have shape {self.grid.shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError("Scalar field must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass
class WeakResidual:
    """Largest weak residual against one test bump."""

    bump: int
    radius: float
    center: Tuple[float, ...]
    max_residual: float
    witness_s: float


@dataclass
class SubsolutionReport:
    """
    Pointwise and weak residuals of the aggregate inequality.

    Attributes:
        exclusion: δ of the mask min_i |w_i| > δ.
        pointwise_max: Largest masked pointwise residual (-inf when the mask is empty).
        pointwise_witness: (s, node coordinates) of pointwise_max.
        mask_empty: True if no interior node passed the mask in any frame.
        weak: Per-bump weak residuals.
        tolerance: Pass bar factor * (h^2 + ds^2) * scale.
    """

    exclusion: float
    pointwise_max: float
    pointwise_witness: Optional[Tuple[float, Tuple[float, ...]]]
    mask_empty: bool
    weak: List[WeakResidual]
    tolerance: float
    checks_passed: List[str] = field(default_factory=list)
    checks_failed: List[str] = field(default_factory=list)

    @property
    def weak_max(self) -> float:
        return max(r.max_residual for r in self.weak)

    @property
    def status(self) -> str:
        return "fail" if self.checks_failed else "pass"

    def to_dict(self) -> Dict[str, object]:
        return {
            "status": self.status,
            "exclusion": self.exclusion,
            "tolerance": self.tolerance,
            "pointwise_max": self.pointwise_max,
            "pointwise_witness": (
                None
                if self.pointwise_witness is None
                else {"s": self.pointwise_witness[0], "y": list(self.pointwise_witness[1])}
            ),
            "mask_empty": self.mask_empty,
            "weak_max": self.weak_max,
            "weak": [
                {"bump": r.bump, "radius": r.radius, "center": list(r.center), "max": r.max_residual, "s": r.witness_s}
                for r in self.weak
            ],
            "checks_passed": list(self.checks_passed),
            "checks_failed": list(self.checks_failed),
        }


@dataclass
class PartResidual:
    """Weak residual of one component sign part w_i^±."""

    component: int
    sign: str
    max_residual: float
    bump: int
    witness_s: float
    passed: bool


def aggregate_w(W: Field) -> ScalarField:
    """w = Σ_i |w_i| nodewise."""
    return ScalarField(W.grid, np.sum(np.abs(W.values), axis=0))


def bump_family(grid: Grid, count: int = DEFAULT_BUMP_COUNT) -> List[CutoffProfile]:
    """
    Translated, dilated cutoff bumps: three centers {-L/5, 0, L/5} along the
    first axis times count/3 radii spaced geometrically in [L/20, L/5].
    """
    if count < 3 or count % 3:
        raise DomainError(f"Bump count must be a positive multiple of 3, got {count}")
    L = grid.half_extent
    radii = np.geomspace(L / 20.0, L / 5.0, count // 3)
    bumps = []
    for offset in (-L / 5.0, 0.0, L / 5.0):
        center = (offset,) + (0.0,) * (grid.space_dim - 1)
        for radius in radii:
            bump = CutoffProfile(radius=float(radius), center=center)
            require_support(bump, grid)
            bumps.append(bump)
    return bumps


def _scalar_operator(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Δv - y/2 . ∇v for a scalar array (central differences in the interior)."""
    stacked = values[np.newaxis]
    return (laplacian_values(stacked, grid) - 0.5 * drift_values(stacked, grid))[0]


def pointwise_residual(traj: RescaledTrajectory, j: int, params: SystemParams) -> np.ndarray:
    """
    r = w_s - Δw + y/2 . ∇w + βw - (Σβ) w^p at frame j (central difference in s).

    Boundary nodes are set to zero.
    """
    if not 0 < j < len(traj) - 1:
        raise DomainError(f"Pointwise residual needs an interior frame index, got {j}")
    spacing = traj.uniform_spacing()
    grid = traj.grid
    w_prev = aggregate_w(traj[j - 1].W).values
    w = aggregate_w(traj[j].W).values
    w_next = aggregate_w(traj[j + 1].W).values
    w_s = (w_next - w_prev) / (2.0 * spacing)
    r = w_s - _scalar_operator(w, grid) + params.beta_exp * w - params.coupling.total * w**params.p
    r[grid.boundary_mask] = 0.0
    return r


def _weak_residual_series(
    traj: RescaledTrajectory,
    series: Sequence[np.ndarray],
    source: Sequence[np.ndarray],
    bump: CutoffProfile,
    params: SystemParams,
    spacing: float,
) -> np.ndarray:
    """
    d/ds ∫vζρ - ∫v(Δζ - y/2 . ∇ζ)ρ + β∫vζρ - ∫(source)ζρ at the interior frames.
    """
    grid = traj.grid
    zeta = cutoff_field(bump, grid)
    adjoint = cutoff_laplacian(bump, grid) - 0.5 * np.sum(grid.points * cutoff_gradient(bump, grid), axis=0)
    tested = np.array([weighted_integral(grid, v, weight=zeta) for v in series])
    d_ds = (tested[2:] - tested[:-2]) / (2.0 * spacing)
    out = np.empty(len(series) - 2)
    for k in range(1, len(series) - 1):
        v = series[k]
        out[k - 1] = (
            d_ds[k - 1]
            - weighted_integral(grid, v, weight=adjoint)
            + params.beta_exp * tested[k]
            - weighted_integral(grid, source[k], weight=zeta)
        )
    return out


def subsolution_residual(
    traj: RescaledTrajectory,
    params: SystemParams,
    exclusion: Optional[float] = None,
    bumps: Optional[List[CutoffProfile]] = None,
    tolerance_factor: float = DEFAULT_IDENTITY_TOLERANCE_FACTOR,
) -> SubsolutionReport:
    """
    Check the aggregate subsolution inequality pointwise (masked) and weakly.

    Args:
        traj: Rescaled trajectory with at least 3 uniformly spaced frames.
        params: System parameters.
        exclusion: δ of the mask min_i |w_i| > δ; defaults to 1e-3 * sup w.
        bumps: Test bumps; defaults to :func:`bump_family`.
        tolerance_factor: Factor of the discretization tolerance.
    """
    if len(traj) < 3:
        raise DomainError(f"Subsolution checks need at least 3 frames, got {len(traj)}")
    spacing = traj.uniform_spacing()
    grid = traj.grid
    aggregates = [aggregate_w(frame.W).values for frame in traj]
    sup_w = max(float(np.max(w)) for w in aggregates)
    if exclusion is None:
        exclusion = DEFAULT_MASK_FRACTION * sup_w if sup_w > 0 else DEFAULT_MASK_FRACTION
    if not exclusion > 0:
        raise DomainError(f"Exclusion level must be positive, got {exclusion}")
    bumps = bumps if bumps is not None else bump_family(grid)

    total = params.coupling.total
    scale = max(1.0, total * sup_w**params.p, sup_w)
    tolerance = tolerance_factor * (grid.spacing**2 + spacing**2) * scale

    pointwise_max = -np.inf
    witness = None
    any_masked = False
    for j in range(1, len(traj) - 1):
        mask = (np.min(np.abs(traj[j].W.values), axis=0) > exclusion) & grid.interior_mask
        if not np.any(mask):
            continue
        any_masked = True
        r = pointwise_residual(traj, j, params)
        masked = np.where(mask, r, -np.inf)
        index = np.unravel_index(int(np.argmax(masked)), grid.shape)
        if masked[index] > pointwise_max:
            pointwise_max = float(masked[index])
            witness = (float(traj[j].s), tuple(float(grid.points[(k,) + index]) for k in range(grid.space_dim)))
    if not any_masked:
        logger.warning(f"[Subsolution] Mask min|w_i| > {exclusion:.3e} is empty in every frame; pointwise check skipped")

    sources = [total * w**params.p for w in aggregates]
    s_inner = traj.s[1:-1]
    weak = []
    for b, bump in enumerate(bumps):
        residuals = _weak_residual_series(traj, aggregates, sources, bump, params, spacing)
        k = int(np.argmax(residuals))
        weak.append(
            WeakResidual(
                bump=b,
                radius=bump.radius,
                center=tuple(bump.center_for(grid.space_dim).tolist()),
                max_residual=float(residuals[k]),
                witness_s=float(s_inner[k]),
            )
        )

    report = SubsolutionReport(
        exclusion=float(exclusion),
        pointwise_max=float(pointwise_max),
        pointwise_witness=witness,
        mask_empty=not any_masked,
        weak=weak,
        tolerance=tolerance,
    )
    checks = {"pointwise": (not any_masked) or pointwise_max <= tolerance, "weak": report.weak_max <= tolerance}
    report.checks_passed = [name for name, ok in checks.items() if ok]
    report.checks_failed = [name for name, ok in checks.items() if not ok]
    logger.info(
        f"[Subsolution] pointwise max {pointwise_max:.3e}, weak max {report.weak_max:.3e}, "
        f"tolerance {tolerance:.3e} -> {report.status}"
    )
    return report


def component_part_residual(
    traj: RescaledTrajectory,
    params: SystemParams,
    bumps: Optional[List[CutoffProfile]] = None,
    tolerance_factor: float = DEFAULT_IDENTITY_TOLERANCE_FACTOR,
) -> List[PartResidual]:
    """
    Weak residual of w_i^± = max(±w_i, 0) against
    w_s ≤ Δw - y/2 . ∇w - βw + Σ_j β_ij |w_i|^r |w_j|^(r+1) for every (i, ±).
    """
    if len(traj) < 3:
        raise DomainError(f"Subsolution checks need at least 3 frames, got {len(traj)}")
    spacing = traj.uniform_spacing()
    grid = traj.grid
    bumps = bumps if bumps is not None else bump_family(grid)
    r = params.r
    coupling = params.coupling.entries

    magnitudes = []
    for frame in traj:
        powered = np.abs(frame.W.values) ** (r + 1.0)
        coupled = np.einsum("ij,j...->i...", coupling, powered)
        magnitudes.append(np.abs(frame.W.values) ** r * coupled)

    sup_w = max(float(np.max(np.abs(frame.W.values))) for frame in traj)
    scale = max(1.0, params.coupling.total * sup_w**params.p, sup_w)
    tolerance = tolerance_factor * (grid.spacing**2 + spacing**2) * scale
    s_inner = traj.s[1:-1]

    parts = []
    for i in range(params.components):
        for sign, factor in (("+", 1.0), ("-", -1.0)):
            series = [np.maximum(factor * frame.W.values[i], 0.0) for frame in traj]
            source = [m[i] for m in magnitudes]
            best = (-np.inf, 0, 0.0)
            for b, bump in enumerate(bumps):
                residuals = _weak_residual_series(traj, series, source, bump, params, spacing)
                k = int(np.argmax(residuals))
                if residuals[k] > best[0]:
                    best = (float(residuals[k]), b, float(s_inner[k]))
            parts.append(PartResidual(i, sign, best[0], best[1], best[2], best[0] <= tolerance))
    failed = [f"{p.component}{p.sign}" for p in parts if not p.passed]
    if failed:
        logger.warning(f"[Subsolution] Sign-part residuals above tolerance {tolerance:.3e}: {failed}")
    return parts
