"""
Diagnostics evaluated on rescaled trajectories.

- energy: global/local energies, energy tables and identity residuals
- monitors: boundedness monitors and the initial energy bound
- bootstrap: exponent schedules and the (q, R) chain
- subsolution: aggregate subsolution residuals
"""

from .bootstrap import (
    ExponentSchedule,
    bootstrap_chain,
    exponent_schedule,
    threshold_map,
    verify_schedule_on_run,
)
from .energy import (
    EnergySample,
    IdentityReport,
    check_identity_dissipation,
    check_identity_mass,
    check_local_identities,
    convergence_order,
    energy_table,
    global_energy,
    local_energy,
)
from .monitors import MonitorReport, initial_energy_bound, monitor_bounds
from .subsolution import (
    ScalarField,
    aggregate_w,
    bump_family,
    component_part_residual,
    subsolution_residual,
)

__all__ = [
    "EnergySample",
    "IdentityReport",
    "global_energy",
    "local_energy",
    "energy_table",
    "check_identity_mass",
    "check_identity_dissipation",
    "check_local_identities",
    "convergence_order",
    "MonitorReport",
    "monitor_bounds",
    "initial_energy_bound",
    "ExponentSchedule",
    "exponent_schedule",
    "threshold_map",
    "bootstrap_chain",
    "verify_schedule_on_run",
    "ScalarField",
    "aggregate_w",
    "bump_family",
    "subsolution_residual",
    "component_part_residual",
]
