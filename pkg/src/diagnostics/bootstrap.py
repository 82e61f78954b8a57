"""
Exponent Bootstrap
==================

Exact rational arithmetic for the exponent schedule used to lift
space-time integrability of the rescaled energy from q = 2 upward, and
the chain of (q_k, R_k) stages that reaches a target exponent.

Real inputs are converted with ``Fraction(repr(x))``, so 2.2 means the
decimal 11/5 and every comparison below is exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Union

import numpy as np

from config import LAMBDA_BISECTION_TOLERANCE, LAMBDA_UPPER_MARGIN
from core.errors import DomainError, InfeasibleScheduleError, TruncationError, WindowError
from core.grid import weighted_sobolev_norm
from core.nonlinearity import SystemParams
from diagnostics.monitors import MIN_MONITOR_SPAN, Witness, sliding_window_integrals
from solvers.selfsimilar import RescaledTrajectory

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]

COND_QBAR = "q < qbar < q + 1/(p+1)"
COND_LAMBDA = "2 < lambda < lambda_q"
COND_ALPHA = "alpha > 1"
COND_HOLDER = "1 < theta*qbar*alpha'/p1 < q"


def exact(x: Number) -> Fraction:
    """Exact rational value of a number, reading floats by their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if not math.isfinite(x):
        raise DomainError(f"Exponent arithmetic needs finite inputs, got {x}")
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class ExponentSchedule:
    """Constants of one bootstrap step, held as exact fractions."""

    p: Fraction
    q: Fraction
    p1: Fraction
    qbar: Fraction
    lambda_q: Fraction
    lam: Fraction
    theta: Fraction
    alpha: Fraction
    alpha_conj: Fraction

    @property
    def holder_ratio(self) -> Fraction:
        """θ q̄ α' / p1."""
        return self.theta * self.qbar * self.alpha_conj / self.p1

    def conditions(self) -> Dict[str, bool]:
        return {
            COND_QBAR: self.q < self.qbar < self.q + 1 / (self.p + 1),
            COND_LAMBDA: 2 < self.lam < self.lambda_q,
            COND_ALPHA: self.alpha > 1,
            COND_HOLDER: 1 < self.holder_ratio < self.q,
        }

    def to_dict(self) -> Dict[str, object]:
        names = ("p", "q", "p1", "qbar", "lambda_q", "lam", "theta", "alpha", "alpha_conj")
        values = {name: getattr(self, name) for name in names}
        values["holder_ratio"] = self.holder_ratio
        return {
            "values": {("lambda" if k == "lam" else k): float(v) for k, v in values.items()},
            "exact": {("lambda" if k == "lam" else k): str(v) for k, v in values.items()},
            "conditions": self.conditions(),
        }


@dataclass(frozen=True)
class ChainStage:
    """One stage of the bootstrap chain."""

    q: Fraction
    R: float


@dataclass
class ScheduleRunReport:
    """Window integrals of the ball Sobolev norm at every chain stage."""

    schedule: ExponentSchedule
    stages: List[ChainStage]
    window_maxima: List[Witness]

    @property
    def finite(self) -> bool:
        return all(math.isfinite(w.value) for w in self.window_maxima)

    def to_dict(self) -> Dict[str, object]:
        return {
            "schedule": self.schedule.to_dict(),
            "finite": self.finite,
            "stages": [
                {"q": float(stage.q), "q_exact": str(stage.q), "R": stage.R, "max_window": w.value, "witness_s": w.s}
                for stage, w in zip(self.stages, self.window_maxima)
            ],
        }


def lambda_q(p: Number, q: Number) -> Fraction:
    """λ_q = p + 1 - (p-1)/(q+1)."""
    p, q = exact(p), exact(q)
    return p + 1 - (p - 1) / (q + 1)


def threshold_map(p: Number, lam: Number) -> Fraction:
    """λ ↦ (p-1)λ / ((p+1) - λ), increasing on (2, p+1)."""
    p, lam = exact(p), exact(lam)
    if lam >= p + 1:
        raise DomainError(f"threshold_map needs lambda < p + 1, got {lam}")
    return (p - 1) * lam / ((p + 1) - lam)


def _build(p: Fraction, q: Fraction, qbar: Fraction, lam: Fraction) -> ExponentSchedule:
    theta = (p + 1) * (lam - 2) / ((p - 1) * lam)
    if theta >= 1:
        raise InfeasibleScheduleError(COND_ALPHA, f"theta={theta} leaves no room for alpha")
    alpha = 2 / ((1 - theta) * qbar)
    alpha_conj = alpha / (alpha - 1) if alpha != 1 else Fraction(0)
    return ExponentSchedule(
        p=p,
        q=q,
        p1=1 + 1 / p,
        qbar=qbar,
        lambda_q=lambda_q(p, q),
        lam=lam,
        theta=theta,
        alpha=alpha,
        alpha_conj=alpha_conj,
    )


def _feasible(p: Fraction, q: Fraction, qbar: Fraction, lam: Fraction) -> bool:
    try:
        schedule = _build(p, q, qbar, lam)
    except InfeasibleScheduleError:
        return False
    checks = schedule.conditions()
    return checks[COND_ALPHA] and checks[COND_HOLDER]


def _first_violation(schedule: ExponentSchedule) -> Optional[str]:
    for name, ok in schedule.conditions().items():
        if not ok:
            return name
    return None


def exponent_schedule(
    p: Number,
    q: Number,
    qbar: Optional[Number] = None,
    lam: Optional[Number] = None,
) -> ExponentSchedule:
    """
    Build a feasible exponent schedule.

    Defaults: q̄ = q + 1/(2(p+1)); λ is the midpoint between λ_q and the
    smallest feasible λ, located by bisection from λ_q - 1e-6 downward
    (the feasible set is an upper subinterval of (2, λ_q)).

    Raises:
        DomainError: unless p > 1 and q >= 2.
        InfeasibleScheduleError: naming the first violated condition.
    """
    p, q = exact(p), exact(q)
    if p <= 1 or q < 2:
        raise DomainError(f"Exponent schedule needs p > 1 and q >= 2, got p={p}, q={q}")
    qbar = exact(qbar) if qbar is not None else q + 1 / (2 * (p + 1))
    if not q < qbar < q + 1 / (p + 1):
        raise InfeasibleScheduleError(COND_QBAR, f"qbar={qbar}")
    top = lambda_q(p, q)

    if lam is None:
        hi = top - Fraction(LAMBDA_UPPER_MARGIN)
        if not _feasible(p, q, qbar, hi):
            schedule = _build(p, q, qbar, hi)
            raise InfeasibleScheduleError(_first_violation(schedule) or COND_HOLDER, f"lambda={float(hi)}")
        lo = Fraction(2)
        tolerance = Fraction(LAMBDA_BISECTION_TOLERANCE)
        while hi - lo > tolerance:
            mid = (lo + hi) / 2
            if _feasible(p, q, qbar, mid):
                hi = mid
            else:
                lo = mid
        lam = (hi + top) / 2
        logger.info(f"[Bootstrap] p={p}, q={q}: feasible lambda above {float(hi):.9f}, chose {float(lam):.9f}")
    else:
        lam = exact(lam)

    if not 2 < lam < top:
        raise InfeasibleScheduleError(COND_LAMBDA, f"lambda={lam}, lambda_q={top}")
    schedule = _build(p, q, qbar, lam)
    violation = _first_violation(schedule)
    if violation is not None:
        raise InfeasibleScheduleError(violation, f"lambda={float(lam):.6g}, qbar={float(qbar):.6g}")
    return schedule


def chain_length(p: Number, q_target: Number) -> int:
    """m = floor((p+1)(q_target - 2)) + 1 in exact arithmetic."""
    p, q_target = exact(p), exact(q_target)
    return math.floor((p + 1) * (q_target - 2)) + 1


def bootstrap_chain(p: Number, q_target: Number, R_target: float) -> List[ChainStage]:
    """
    Stages (q_k, R_k), k = 0..m, from (2, 4^m R_target) to (q_target, R_target).

    The m increments are equal, (q_target - 2)/m, which is strictly below
    1/(p+1), and the last stage is exactly q_target. This replaces steps of
    1/(p+1) capped just below q_target: same m and radii, but the exponents
    in schedule.json are evenly spaced. q_target = 2 gives the single base
    stage (2, R_target).

    Raises:
        DomainError: if q_target < 2 or R_target <= 0.
    """
    p, q_target = exact(p), exact(q_target)
    if q_target < 2:
        raise DomainError(f"q_target must be >= 2, got {q_target}")
    if not R_target > 0:
        raise DomainError(f"R_target must be positive, got {R_target}")
    if q_target == 2:
        return [ChainStage(Fraction(2), float(R_target))]
    m = chain_length(p, q_target)
    increment = (q_target - 2) / m
    return [ChainStage(2 + k * increment, float(4 ** (m - k)) * R_target) for k in range(m + 1)]


def verify_schedule_on_run(
    schedule: ExponentSchedule,
    traj: RescaledTrajectory,
    R: float,
    params: SystemParams,
) -> ScheduleRunReport:
    """
    Evaluate sup_s ∫_s^{s+1} ‖W‖_{W^{1,2}ρ(B_Rk)}^{2 q_k} for every stage of the chain to (q, R).

    Raises:
        TruncationError: if some stage radius exceeds the grid half-extent.
        WindowError: if the trajectory is too short.
    """
    stages = bootstrap_chain(schedule.p, schedule.q, R)
    grid = traj.grid
    widest = max(stage.R for stage in stages)
    if widest > grid.half_extent * (1.0 + 1e-12):
        raise TruncationError(
            f"Chain radius {widest:g} exceeds grid half-extent {grid.half_extent:g}; lower R_target"
        )
    spacing = traj.uniform_spacing()
    s = traj.s
    if s[-1] - s[0] < MIN_MONITOR_SPAN * (1.0 - 1e-9):
        raise WindowError(f"Schedule verification needs {MIN_MONITOR_SPAN:g} units of s")

    maxima = []
    for stage in stages:
        norms = np.array([weighted_sobolev_norm(f.W, params.beta_exp, stage.R) for f in traj])
        starts, windows = sliding_window_integrals(s, norms ** (2.0 * float(stage.q)), spacing)
        j = int(np.argmax(windows))
        maxima.append(Witness(float(windows[j]), float(starts[j])))
    logger.info(f"[Bootstrap] Verified {len(stages)} stages up to q={float(schedule.q):g}, R={R:g}")
    return ScheduleRunReport(schedule=schedule, stages=stages, window_maxima=maxima)

