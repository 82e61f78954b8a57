"""
Time integrators for the parabolic system.

- physical: blow-up runs in (x, t), blow-up time extrapolation and rate fits
- selfsimilar: similarity variables and the rescaled evolution in (y, s)
"""

from .physical import (
    BlowupEstimate,
    PhysicalState,
    RateFit,
    SolverControls,
    Trajectory,
    estimate_blowup_time,
    fit_rate,
    rhs_physical,
    run_to_blowup,
    similarity_denormalize,
    similarity_normalize,
    step,
)
from .selfsimilar import (
    RescaledTrajectory,
    SelfSimilarFrame,
    evolve_rescaled,
    from_selfsimilar,
    kappa_constant,
    rhs_rescaled,
    step_rescaled,
    to_selfsimilar,
)

__all__ = [
    "PhysicalState",
    "Trajectory",
    "BlowupEstimate",
    "RateFit",
    "SolverControls",
    "rhs_physical",
    "step",
    "run_to_blowup",
    "estimate_blowup_time",
    "fit_rate",
    "similarity_normalize",
    "similarity_denormalize",
    "SelfSimilarFrame",
    "RescaledTrajectory",
    "to_selfsimilar",
    "from_selfsimilar",
    "rhs_rescaled",
    "step_rescaled",
    "evolve_rescaled",
    "kappa_constant",
]
