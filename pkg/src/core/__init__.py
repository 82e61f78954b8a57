"""
Core modules of the blow-up laboratory.

This package contains the building blocks shared by the solvers and diagnostics:
- nonlinearity: coupling matrices, the potential G and its gradient F, structure constants
- grid: uniform grids, fields, weighted quadrature, finite differences and cutoffs
- errors: the error hierarchy
"""

from .errors import LabError
from .grid import (
    CutoffProfile,
    Field,
    Grid,
    interpolate,
    read_field,
    sup_norm,
    weighted_lebesgue_norm,
    weighted_sobolev_norm,
    write_field,
)
from .nonlinearity import (
    CouplingMatrix,
    SystemParams,
    check_structure,
    eval_F,
    eval_G,
    exponent_regime,
    sobolev_exponents,
    structure_constants,
)

__all__ = [
    "LabError",
    "Grid",
    "Field",
    "CutoffProfile",
    "interpolate",
    "sup_norm",
    "weighted_lebesgue_norm",
    "weighted_sobolev_norm",
    "read_field",
    "write_field",
    "CouplingMatrix",
    "SystemParams",
    "eval_G",
    "eval_F",
    "check_structure",
    "structure_constants",
    "sobolev_exponents",
    "exponent_regime",
]
