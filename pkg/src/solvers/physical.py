"""
Physical-Variable Solver
========================

Integrates U_t - ΔU = F(U) on a truncated grid with explicit RK4,
detects finite-time blow-up, extrapolates the blow-up time and fits
the growth rate of the sup-norm against T - t.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.stats import linregress

from config import (
    DEFAULT_BLOWUP_THRESHOLD,
    DEFAULT_DT_INIT,
    DEFAULT_MAX_STEPS,
    DEFAULT_SNAPSHOT_EVERY,
    DEFAULT_T_MAX,
    DT_SAFETY,
    GROWTH_LIMIT,
)
from core.errors import BlowupOverflow, DomainError, FitWindowError
from core.grid import Closure, Field, Grid, interpolate, laplacian_values, pointwise_norm
from core.nonlinearity import StructureConstants, SystemParams, eval_F
from solvers.integrators import rk4_step

logger = logging.getLogger(__name__)

OUTCOME_BLOWUP = "blowup"
OUTCOME_NO_BLOWUP = "no-blow-up-detected"

# Minimum samples and decade span of T - t required by the rate fit
MIN_FIT_SAMPLES = 20
MIN_FIT_DECADES = 2.0


@dataclass(frozen=True)
class PhysicalState:
    """Current time and field of a physical run."""

    t: float
    U: Field

    def __post_init__(self) -> None:
        if not math.isfinite(self.t) or self.t < 0:
            raise DomainError(f"Physical time must be finite and >= 0, got {self.t}")


@dataclass
class SolverControls:
    """
    Controls of :func:`run_to_blowup`.

    Attributes:
        dt_init: First attempted step.
        threshold: Sup-norm at which the run is declared blown up.
        t_max: Final time when no blow-up occurs.
        snapshot_every: Keep a field snapshot every this many accepted steps (0 = none).
        boundary: Closure of the Laplacian ("dirichlet" or "neumann").
        growth_limit: Largest accepted relative sup-norm jump per step.
        safety: Fraction of the explicit stability limit.
        max_steps: Hard cap on accepted steps.
    """

    dt_init: float = DEFAULT_DT_INIT
    threshold: float = DEFAULT_BLOWUP_THRESHOLD
    t_max: float = DEFAULT_T_MAX
    snapshot_every: int = DEFAULT_SNAPSHOT_EVERY
    boundary: str = "dirichlet"
    growth_limit: float = GROWTH_LIMIT
    safety: float = DT_SAFETY
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self) -> None:
        if self.dt_init <= 0 or self.threshold <= 0 or self.t_max <= 0:
            raise DomainError("dt_init, threshold and t_max must be positive")
        if self.boundary not in ("dirichlet", "neumann"):
            raise DomainError(f"Unknown boundary closure '{self.boundary}'")
        if not 0 < self.growth_limit < 1 or not 0 < self.safety <= 1:
            raise DomainError("growth_limit must lie in (0, 1) and safety in (0, 1]")
        if self.snapshot_every < 0 or self.max_steps < 1:
            raise DomainError("snapshot_every must be >= 0 and max_steps >= 1")


@dataclass
class Trajectory:
    """
    Time series of a physical run.

    Attributes:
        times: Strictly increasing accepted times, starting at 0.
        sup_norms: Sup-norm at each accepted time.
        dts: Step that led to each sample (0 for the initial sample).
        snapshots: (t, field) pairs at the snapshot cadence, final state included.
        rejections: Number of rejected step attempts.
        outcome: "blowup" or "no-blow-up-detected".
    """

    times: np.ndarray
    sup_norms: np.ndarray
    dts: np.ndarray
    snapshots: List[Tuple[float, Field]] = field(default_factory=list)
    rejections: int = 0
    outcome: str = OUTCOME_NO_BLOWUP

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.sup_norms = np.asarray(self.sup_norms, dtype=float)
        self.dts = np.asarray(self.dts, dtype=float)
        if not (self.times.shape == self.sup_norms.shape == self.dts.shape) or self.times.ndim != 1:
            raise DomainError("times, sup_norms and dts must be 1-D arrays of equal length")
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise DomainError("Trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.sup_norms)) or np.any(self.sup_norms < 0):
            raise DomainError("Trajectory sup-norms must be finite and nonnegative")

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def blew_up(self) -> bool:
        return self.outcome == OUTCOME_BLOWUP

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "sup_norm": self.sup_norms, "dt": self.dts})


@dataclass(frozen=True)
class BlowupEstimate:
    """Extrapolated blow-up time and the window it was fitted on."""

    T_est: float
    fit_window: Tuple[float, float]
    residual: float
    samples: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "T_est": self.T_est,
            "fit_window": list(self.fit_window),
            "residual": self.residual,
            "samples": self.samples,
        }


@dataclass(frozen=True)
class RateFit:
    """
    Least-squares rate fit of log sup-norm against -log(T - t).

    Attributes:
        exponent: Fitted slope.
        plateau: Median of (T - t)^(1/(p-1)) * sup-norm over the window.
        window: (t_lo, t_hi) of the fitted samples.
        misfit: Root-mean-square residual of the regression in log space.
        expected_exponent: 1/(p-1).
        plateau_variation: (max - min) / median of the plateau over the last two decades of the window.
        lower_bound: ((p-1) C_F)^(-1/(p-1)) when sphere constants were given.
        min_plateau: Smallest plateau sample in the window.
        lower_bound_ok: Whether min_plateau respects lower_bound.
        samples: Number of samples used.
    """

    exponent: float
    plateau: float
    window: Tuple[float, float]
    misfit: float
    expected_exponent: float
    plateau_variation: float
    min_plateau: float
    samples: int
    lower_bound: Optional[float] = None
    lower_bound_ok: Optional[bool] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.exponent):
            raise FitWindowError("Fitted exponent is not finite")
        if not (math.isfinite(self.plateau) and self.plateau > 0):
            raise FitWindowError(f"Fitted plateau must be finite and positive, got {self.plateau}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "exponent": self.exponent,
            "expected_exponent": self.expected_exponent,
            "plateau": self.plateau,
            "plateau_variation": self.plateau_variation,
            "min_plateau": self.min_plateau,
            "lower_bound": self.lower_bound,
            "lower_bound_ok": self.lower_bound_ok,
            "window": list(self.window),
            "misfit": self.misfit,
            "samples": self.samples,
        }


# ----------------------------------------------------------------------
# Right-hand side and stepping
# ----------------------------------------------------------------------
def _rhs_values(values: np.ndarray, grid: Grid, params: SystemParams, closure: Closure) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise BlowupOverflow("Non-finite values inside a Runge-Kutta stage")
    with np.errstate(over="ignore", invalid="ignore"):
        out = laplacian_values(values, grid, closure) + eval_F(values, params)
    if closure == "dirichlet":
        out[:, grid.boundary_mask] = 0.0
    return out


def rhs_physical(state: PhysicalState, params: SystemParams, closure: Closure = "dirichlet") -> Field:
    """
    ΔU + F(U) nodewise.

    With the default Dirichlet closure the rate vanishes on boundary nodes,
    which therefore keep their initial values.
    """
    return state.U.with_values(_rhs_values(state.U.values, state.U.grid, params, closure))


def stability_limit(grid: Grid) -> float:
    """Explicit diffusion limit h^2 / (2N)."""
    return grid.spacing**2 / (2.0 * grid.space_dim)


def _advance(values: np.ndarray, dt: float, grid: Grid, params: SystemParams, closure: Closure) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        new = rk4_step(values, dt, lambda v: _rhs_values(v, grid, params, closure))
    if not np.all(np.isfinite(new)):
        raise BlowupOverflow(f"Non-finite values after a step of size {dt:.3e}")
    return new


def step(
    state: PhysicalState,
    dt: float,
    params: SystemParams,
    closure: Closure = "dirichlet",
    safety: float = DT_SAFETY,
) -> PhysicalState:
    """
    One classical RK4 step.

    Raises:
        DomainError: if dt is not positive or exceeds safety * h^2 / (2N).
        BlowupOverflow: if the step produces non-finite values.
    """
    limit = safety * stability_limit(state.U.grid)
    if not (dt > 0) or dt > limit * (1.0 + 1e-12):
        raise DomainError(f"Step {dt} outside (0, {limit:.6g}]")
    new = _advance(state.U.values, dt, state.U.grid, params, closure)
    return PhysicalState(state.t + dt, state.U.with_values(new))


# ----------------------------------------------------------------------
# Blow-up runs
# ----------------------------------------------------------------------
def run_to_blowup(
    U0: Field,
    params: SystemParams,
    controls: Optional[SolverControls] = None,
) -> Tuple[Trajectory, Optional[BlowupEstimate]]:
    """
    Integrate until the sup-norm reaches the threshold or t_max is reached.

    Steps whose relative sup-norm jump exceeds ``growth_limit`` (or which
    overflow) are rejected and retried with half the step. The step is
    doubled again, up to the stability limit, after calm steps.

    Returns:
        The trajectory and, on blow-up, the extrapolated blow-up time
        (``None`` when no blow-up was detected).
    """
    controls = controls or SolverControls()
    grid = U0.grid
    if U0.components != params.components:
        raise DomainError(f"Initial data has {U0.components} components, system has {params.components}")

    limit = controls.safety * stability_limit(grid)
    dt = min(controls.dt_init, limit)
    values = np.array(U0.values)
    t = 0.0
    sup0 = float(np.max(pointwise_norm(values)))

    times: List[float] = [0.0]
    sups: List[float] = [sup0]
    dts: List[float] = [0.0]
    snapshots: List[Tuple[float, Field]] = [(0.0, U0)] if controls.snapshot_every > 0 else []
    rejections = 0
    accepted = 0
    outcome = OUTCOME_NO_BLOWUP

    logger.info(
        f"[PhysicalSolver] Starting run: N={grid.space_dim}, M={params.components}, p={params.p:g}, "
        f"n={grid.points_per_axis}, L={grid.half_extent:g}, dt_limit={limit:.3e}, sup0={sup0:.6g}"
    )

    if sup0 == 0.0:
        logger.info("[PhysicalSolver] Zero initial data is an equilibrium; no blow-up")
        trajectory = Trajectory(times, sups, dts, snapshots, 0, OUTCOME_NO_BLOWUP)
        return trajectory, None

    while t < controls.t_max and accepted < controls.max_steps:
        dt_try = min(dt, controls.t_max - t)
        if t + dt_try <= t:
            logger.warning(f"[PhysicalSolver] Step underflow at t={t:.17g}; stopping")
            break
        try:
            new = _advance(values, dt_try, grid, params, controls.boundary)
        except BlowupOverflow:
            dt = 0.5 * dt_try
            rejections += 1
            continue
        new_sup = float(np.max(pointwise_norm(new)))
        jump = abs(new_sup - sups[-1]) / sups[-1]
        if jump > controls.growth_limit:
            dt = 0.5 * dt_try
            rejections += 1
            continue

        t += dt_try
        values = new
        accepted += 1
        times.append(t)
        sups.append(new_sup)
        dts.append(dt_try)
        if controls.snapshot_every and accepted % controls.snapshot_every == 0:
            snapshots.append((t, Field(grid, values)))

        if new_sup >= controls.threshold:
            outcome = OUTCOME_BLOWUP
            break
        if jump < 0.25 * controls.growth_limit and dt_try == dt:
            dt = min(2.0 * dt, limit)

    if controls.snapshot_every and (not snapshots or snapshots[-1][0] != t):
        snapshots.append((t, Field(grid, values)))

    trajectory = Trajectory(times, sups, dts, snapshots, rejections, outcome)
    logger.info(
        f"[PhysicalSolver] Finished: outcome={outcome}, t={t:.10g}, sup={sups[-1]:.6g}, "
        f"accepted={accepted}, rejected={rejections}"
    )
    if outcome != OUTCOME_BLOWUP:
        return trajectory, None
    return trajectory, estimate_blowup_time(trajectory, params)


def estimate_blowup_time(traj: Trajectory, params: SystemParams, decade: float = 10.0) -> BlowupEstimate:
    """
    Extrapolate the blow-up time from the final decade of growth.

    Under the type-I law sup^(1-p) is affine in t with slope -(p-1);
    the zero of the least-squares line gives T.
    """
    if len(traj) < 3:
        raise FitWindowError("At least three samples are needed to extrapolate the blow-up time")
    t_last = traj.times[-1]
    sup_last = traj.sup_norms[-1]
    mask = traj.sup_norms >= sup_last / decade
    if np.count_nonzero(mask) < 3:
        mask = np.zeros(len(traj), dtype=bool)
        mask[-3:] = True

    tau = traj.times[mask] - t_last
    z = traj.sup_norms[mask] ** (1.0 - params.p)
    fit = linregress(tau, z)
    if not fit.slope < 0:
        raise FitWindowError(f"sup^(1-p) is not decreasing over the final decade (slope {fit.slope:.3e})")

    lead = -fit.intercept / fit.slope
    if not lead > 0:
        # Line crosses zero before the last sample; use the local law instead
        lead = z[-1] / (params.p - 1.0)
    T_est = float(t_last + lead)

    model = fit.intercept + fit.slope * tau
    residual = float(np.sqrt(np.mean((z - model) ** 2)) / z[0])
    window = (float(traj.times[mask][0]), float(t_last))
    logger.info(f"[PhysicalSolver] Estimated T={T_est:.10g} from {int(mask.sum())} samples on {window}")
    return BlowupEstimate(T_est=T_est, fit_window=window, residual=residual, samples=int(mask.sum()))


def fit_rate(
    traj: Trajectory,
    T_est: float,
    params: SystemParams,
    constants: Optional[StructureConstants] = None,
    window: Optional[Tuple[float, float]] = None,
) -> RateFit:
    """
    Fit sup ~ plateau * (T - t)^(-exponent).

    The default window drops the first decade of T - t (transient) and
    the samples within 10x of the last one (sensitive to the error in T).

    Raises:
        FitWindowError: fewer than 20 samples or less than two decades of T - t.
    """
    tau = T_est - traj.times
    valid = (tau > 0) & (traj.sup_norms > 0)
    if not np.any(valid):
        raise FitWindowError("No samples precede the estimated blow-up time")

    if window is None:
        tau_valid = tau[valid]
        upper = tau_valid[0] / 10.0
        lower = 10.0 * tau_valid[-1]
        mask = valid & (tau <= upper) & (tau >= lower)
    else:
        t_lo, t_hi = window
        mask = valid & (traj.times >= t_lo) & (traj.times <= t_hi)

    count = int(np.count_nonzero(mask))
    if count < MIN_FIT_SAMPLES:
        raise FitWindowError(f"Rate fit needs at least {MIN_FIT_SAMPLES} samples, window has {count}")
    tau_w = tau[mask]
    decades = math.log10(tau_w.max() / tau_w.min())
    if decades < MIN_FIT_DECADES:
        raise FitWindowError(f"Rate fit needs {MIN_FIT_DECADES:g} decades of T - t, window spans {decades:.2f}")

    sup_w = traj.sup_norms[mask]
    x = -np.log(tau_w)
    y = np.log(sup_w)
    fit = linregress(x, y)
    misfit = float(np.sqrt(np.mean((y - (fit.intercept + fit.slope * x)) ** 2)))

    beta = params.beta_exp
    plateau_samples = tau_w**beta * sup_w
    plateau = float(np.median(plateau_samples))
    tail = tau_w <= 100.0 * tau_w.min()
    tail_samples = plateau_samples[tail]
    plateau_variation = float((tail_samples.max() - tail_samples.min()) / np.median(tail_samples))
    min_plateau = float(plateau_samples.min())

    lower_bound = None
    lower_ok = None
    if constants is not None:
        lower_bound = float(((params.p - 1.0) * constants.C_F) ** (-beta))
        lower_ok = bool(min_plateau >= lower_bound * (1.0 - 1e-3))

    result = RateFit(
        exponent=float(fit.slope),
        plateau=plateau,
        window=(float(traj.times[mask][0]), float(traj.times[mask][-1])),
        misfit=misfit,
        expected_exponent=beta,
        plateau_variation=plateau_variation,
        min_plateau=min_plateau,
        samples=count,
        lower_bound=lower_bound,
        lower_bound_ok=lower_ok,
    )
    logger.info(
        f"[PhysicalSolver] Rate fit: exponent={result.exponent:.6f} (expected {beta:.6f}), "
        f"plateau={plateau:.6g}, samples={count}, decades={decades:.2f}"
    )
    return result


# ----------------------------------------------------------------------
# Similarity normalization
# ----------------------------------------------------------------------
def similarity_normalize(
    U0: Field,
    T: float,
    params: SystemParams,
    target: Optional[Grid] = None,
) -> Field:
    """
    Z(x) = T^(1/(p-1)) U0(sqrt(T) x), the data whose solution blows up at time 1.

    Args:
        U0: Data in physical variables.
        T: Blow-up time of U0 (> 0).
        params: System parameters.
        target: Grid of the normalized data; defaults to the source grid scaled by 1/sqrt(T).

    Raises:
        TruncationError: if a scaled node falls outside the source grid.
    """
    if not (math.isfinite(T) and T > 0):
        raise DomainError(f"Blow-up time must be positive, got {T}")
    root = math.sqrt(T)
    target = target or U0.grid.scaled(1.0 / root)
    values = T**params.beta_exp * interpolate(U0, root * target.points)
    return Field(target, values)


def similarity_denormalize(
    Z: Field,
    T: float,
    params: SystemParams,
    target: Optional[Grid] = None,
) -> Field:
    """Inverse of :func:`similarity_normalize`: U(x) = T^(-1/(p-1)) Z(x / sqrt(T))."""
    if not (math.isfinite(T) and T > 0):
        raise DomainError(f"Blow-up time must be positive, got {T}")
    root = math.sqrt(T)
    target = target or Z.grid.scaled(root)
    values = T ** (-params.beta_exp) * interpolate(Z, target.points / root)
    return Field(target, values)
