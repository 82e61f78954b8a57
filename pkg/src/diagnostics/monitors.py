"""
Boundedness monitors along rescaled trajectories.

Each monitored quantity is reported as its extremum together with the
frame time that attains it, so every bound is falsifiable per run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from config import DEFAULT_MONITOR_TOLERANCE
from core.errors import DomainError, WindowError
from core.grid import (
    CutoffProfile,
    Field,
    gradient_values,
    pointwise_norm,
    weighted_lebesgue_norm,
    weighted_sobolev_norm,
)
from core.nonlinearity import StructureConstants, SystemParams
from diagnostics.energy import (
    dissipation,
    global_energy,
    local_energy,
    potential_integral,
    weighted_mass,
)
from solvers.selfsimilar import RescaledTrajectory, to_selfsimilar

logger = logging.getLogger(__name__)

# Length in s of the sliding windows
WINDOW_LENGTH = 1.0

# Shortest trajectory span accepted by the monitors
MIN_MONITOR_SPAN = 2.0


@dataclass(frozen=True)
class Witness:
    """A reported value and the frame time that attains it."""

    value: float
    s: float


@dataclass
class MonitorReport:
    """
    Extrema of the monitored quantities with witnesses and pass flags.

    Attributes:
        quantities: Monitored quantity name -> witness.
        flags: Checked inequality name -> passed.
        tolerance: Absolute tolerance used by the flags.
        ball_radius: R of the ball quantities.
        q: Exponent of the ball window integrals.
        cutoff_radius: Radius of the cutoff used for E_ψ.
        series: Per-frame series the extrema were taken from.
    """

    quantities: Dict[str, Witness]
    flags: Dict[str, bool]
    tolerance: float
    ball_radius: float
    q: float
    cutoff_radius: float
    series: Dict[str, List[float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> Dict[str, object]:
        return {
            "status": self.status,
            "tolerance": self.tolerance,
            "ball_radius": self.ball_radius,
            "q": self.q,
            "cutoff_radius": self.cutoff_radius,
            "flags": dict(self.flags),
            "quantities": {name: asdict(w) for name, w in self.quantities.items()},
        }


@dataclass(frozen=True)
class InitialEnergyBound:
    """Largest initial energy over sampled centers and the crude a priori bound."""

    M0: float
    crude_bound: float
    per_center: Tuple[Tuple[Tuple[float, ...], float], ...]

    def to_dict(self) -> Dict[str, object]:
        return {
            "M0": self.M0,
            "crude_bound": self.crude_bound,
            "per_center": [{"center": list(c), "E": e} for c, e in self.per_center],
        }


def sliding_window_integrals(s: np.ndarray, values: np.ndarray, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    """Trapezoidal integrals of ``values`` over [s_i, s_i + 1] for every admissible start."""
    steps = int(round(WINDOW_LENGTH / spacing))
    if steps < 1 or steps > len(s) - 1:
        raise WindowError(
            f"Window of length {WINDOW_LENGTH:g} needs {steps} frame gaps, trajectory has {len(s) - 1}"
        )
    cumulative = cumulative_trapezoid(values, dx=spacing, initial=0.0)
    return s[: len(s) - steps], cumulative[steps:] - cumulative[:-steps]


def _argmax(s: np.ndarray, values: np.ndarray) -> Witness:
    j = int(np.argmax(values))
    return Witness(float(values[j]), float(s[j]))


def _argmin(s: np.ndarray, values: np.ndarray) -> Witness:
    j = int(np.argmin(values))
    return Witness(float(values[j]), float(s[j]))


def jensen_constant(params: SystemParams, constants: StructureConstants) -> float:
    """c_1 = (p-1) c_G (4π)^(-N(p-1)/4)."""
    N = params.space_dim
    return (params.p - 1.0) * constants.c_G * (4.0 * math.pi) ** (-N * (params.p - 1.0) / 4.0)


def monitor_bounds(
    traj: RescaledTrajectory,
    R: float,
    q: float,
    params: SystemParams,
    constants: Optional[StructureConstants] = None,
    cutoff: Optional[CutoffProfile] = None,
    tolerance: float = DEFAULT_MONITOR_TOLERANCE,
    closure: str = "dirichlet",
) -> MonitorReport:
    """
    Monitor every quantity the energy method bounds along a trajectory.

    Reports (a) the monotonicity defect of E, (b) min E, (c) the cumulative
    dissipation against E at the first frame, (d) sup ‖W‖_L2ρ, (e) sliding
    windows of ‖W‖_{L^(p+1)ρ}^(2(p+1)), (f) the ratio
    ‖W‖^2_{W^{1,2}ρ} / (1 + ‖W_s‖_L2ρ), (g) the range of E_ψ, (h) sliding
    windows of the ball quantities in B_R and (i) the Jensen defect when
    sphere constants are given. Flags (a)-(c) and (i) use ``tolerance``
    scaled by max(1, |E(s0)|).

    Raises:
        WindowError: if the trajectory spans less than two units of s.
    """
    if q < 2:
        raise DomainError(f"Window exponent q must be >= 2, got {q}")
    spacing = traj.uniform_spacing()
    s = traj.s
    span = float(s[-1] - s[0])
    if span < MIN_MONITOR_SPAN * (1.0 - 1e-9):
        raise WindowError(f"Monitors need a trajectory spanning {MIN_MONITOR_SPAN:g} in s, got {span:.6g}")

    cutoff = cutoff or CutoffProfile(radius=0.5 * R)
    p = params.p
    beta = params.beta_exp

    E = np.array([global_energy(f.W, params) for f in traj])
    E_loc = np.array([local_energy(f.W, cutoff, params) for f in traj])
    diss = np.array([dissipation(f.W, params, closure) for f in traj])
    l2 = np.array([weighted_lebesgue_norm(f.W, 2.0) for f in traj])
    lp1 = np.array([weighted_lebesgue_norm(f.W, p + 1.0) for f in traj])
    w12 = np.array([weighted_sobolev_norm(f.W, beta) for f in traj])
    ball_lp1 = np.array([weighted_lebesgue_norm(f.W, p + 1.0, R) ** (p + 1.0) for f in traj])
    ball_w12 = np.array([weighted_sobolev_norm(f.W, beta, R) for f in traj])

    scale = max(1.0, abs(float(E[0])))
    tol = tolerance * scale

    running_min = np.minimum.accumulate(E)
    defects = np.zeros_like(E)
    defects[1:] = E[1:] - running_min[:-1]
    cumulative_diss = cumulative_trapezoid(diss, dx=spacing, initial=0.0)
    ratio = w12**2 / (1.0 + np.sqrt(diss))

    starts, lp1_windows = sliding_window_integrals(s, lp1 ** (2.0 * (p + 1.0)), spacing)
    _, ball_lp1_windows = sliding_window_integrals(s, ball_lp1**q, spacing)
    _, ball_w12_windows = sliding_window_integrals(s, ball_w12 ** (2.0 * q), spacing)

    quantities: Dict[str, Witness] = {
        "monotonicity_defect": _argmax(s, defects),
        "min_energy": _argmin(s, E),
        "max_energy": _argmax(s, E),
        "cumulative_dissipation": Witness(float(cumulative_diss[-1]), float(s[-1])),
        "initial_energy": Witness(float(E[0]), float(s[0])),
        "sup_l2rho": _argmax(s, l2),
        "window_lp1rho": _argmax(starts, lp1_windows),
        "sobolev_ratio": _argmax(s, ratio),
        "max_local_energy": _argmax(s, E_loc),
        "min_local_energy": _argmin(s, E_loc),
        "window_ball_lp1": _argmax(starts, ball_lp1_windows),
        "window_ball_w12": _argmax(starts, ball_w12_windows),
    }
    flags = {
        "energy_nonincreasing": quantities["monotonicity_defect"].value <= tol,
        "energy_nonnegative": quantities["min_energy"].value >= -tol,
        "dissipation_bounded": quantities["cumulative_dissipation"].value <= float(E[0]) + tol,
    }

    if constants is not None:
        c1 = jensen_constant(params, constants)
        G_int = np.array([potential_integral(f.W, params) for f in traj])
        mass = 2.0 * np.array([weighted_mass(f.W) for f in traj])
        jensen = (p - 1.0) * G_int - c1 * mass ** ((p + 1.0) / 2.0)
        quantities["jensen_defect"] = _argmin(s, jensen)
        flags["jensen_lower_bound"] = quantities["jensen_defect"].value >= -tol

    report = MonitorReport(
        quantities=quantities,
        flags=flags,
        tolerance=tol,
        ball_radius=R,
        q=q,
        cutoff_radius=cutoff.radius,
        series={"s": s.tolist(), "E": E.tolist(), "E_loc": E_loc.tolist(), "dissipation": diss.tolist()},
    )
    failed = [name for name, ok in flags.items() if not ok]
    if failed:
        logger.warning(f"[Monitors] R={R:g}, q={q:g}: failed {failed}")
    else:
        logger.info(f"[Monitors] R={R:g}, q={q:g}: all {len(flags)} checks passed")
    return report


def initial_energy_bound(
    U0: Field,
    centers: Sequence[Sequence[float]],
    T: float,
    params: SystemParams,
    y_grid=None,
) -> InitialEnergyBound:
    """
    Largest initial rescaled energy over the given centers.

    The crude bound is C (sup|U0|^2 + sup|∇U0|^2) with
    C = 1/2 (4π)^(N/2) max(T^(2β+1), β T^(2β)), which dominates
    1/2 ∫(|∇W|^2 + β|W|^2)ρ at s = -log T for every center.
    """
    if not centers:
        raise DomainError("At least one center is required")
    per_center = []
    for center in centers:
        frame = to_selfsimilar(U0, 0.0, center, T, params, y_grid)
        per_center.append((tuple(float(c) for c in np.atleast_1d(center)), global_energy(frame.W, params)))

    N = params.space_dim
    beta = params.beta_exp
    grad = gradient_values(U0.values, U0.grid)
    sup_u = float(np.max(pointwise_norm(U0.values)))
    sup_grad = float(np.max(np.sqrt(np.sum(grad**2, axis=(0, 1)))))
    constant = 0.5 * (4.0 * math.pi) ** (N / 2.0) * max(T ** (2.0 * beta + 1.0), beta * T ** (2.0 * beta))
    crude = constant * (sup_u**2 + sup_grad**2)

    M0 = max(e for _, e in per_center)
    logger.info(f"[Monitors] Initial energy over {len(per_center)} centers: M0={M0:.6g}, crude bound={crude:.6g}")
    return InitialEnergyBound(M0=M0, crude_bound=crude, per_center=tuple(per_center))
