"""
Experiment Configuration
========================

YAML experiment files, their validation and the construction of grids,
system parameters and initial data from them.

A configuration has the sections ``system``, ``grid``, ``initial_data``,
``solver``, ``monitors``, ``verify`` and ``outputs`` plus the top-level keys
``seed`` and ``rate_experiment``. Every key is optional; missing keys take
the defaults from ``config.py``. Validation collects every problem, each
tagged with the line it was found on, before anything is computed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml

from config import (
    DEFAULT_BLOWUP_THRESHOLD,
    DEFAULT_BUMP_COUNT,
    DEFAULT_DS,
    DEFAULT_DT_INIT,
    DEFAULT_FRAME_EVERY,
    DEFAULT_HALF_EXTENT,
    DEFAULT_IDENTITY_TOLERANCE_FACTOR,
    DEFAULT_MASK_FRACTION,
    DEFAULT_MAX_STEPS,
    DEFAULT_MONITOR_TOLERANCE,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_POINTS_PER_AXIS,
    DEFAULT_S_MAX,
    DEFAULT_SNAPSHOT_EVERY,
    DEFAULT_T_MAX,
)
from core.errors import ConfigError, DomainError, LabError
from core.grid import Field, Grid
from core.nonlinearity import CouplingMatrix, SystemParams, sobolev_exponents
from solvers.selfsimilar import kappa_constant

PHYSICAL_KINDS = ("gaussian", "dipole", "constant", "zero")
RESCALED_KINDS = ("kappa", "perturbed_kappa")
BOUNDARIES = ("dirichlet", "neumann")


@dataclass
class SystemSection:
    space_dim: int = 1
    components: int = 1
    r: float = 1.0
    coupling: List[List[float]] = field(default_factory=lambda: [[1.0]])


@dataclass
class GridSection:
    half_extent: float = DEFAULT_HALF_EXTENT
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS


@dataclass
class InitialDataSection:
    """
    Initial data.

    kinds: gaussian A e^(-|x|^2/w^2), dipole A x_1 e^(-|x|^2/w^2), constant
    (``values`` or A per component), zero, kappa (the constant rescaled
    state) and perturbed_kappa κ(1 - ε e^(-|y|^2/w^2)). ``signs`` multiplies
    component i by ±1.
    """

    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    epsilon: float = 0.1
    signs: Optional[List[int]] = None
    values: Optional[List[float]] = None


@dataclass
class SolverSection:
    boundary: str = "dirichlet"
    dt_init: float = DEFAULT_DT_INIT
    threshold: float = DEFAULT_BLOWUP_THRESHOLD
    t_max: float = DEFAULT_T_MAX
    max_steps: int = DEFAULT_MAX_STEPS
    ds: float = DEFAULT_DS
    s_max: float = DEFAULT_S_MAX
    frame_every: int = DEFAULT_FRAME_EVERY
    T: float = 1.0


@dataclass
class MonitorSection:
    ball_radii: List[float] = field(default_factory=lambda: [2.0])
    q_values: List[float] = field(default_factory=lambda: [2.0, 3.0])
    cutoff_radii: List[float] = field(default_factory=lambda: [2.0])
    tolerance: float = DEFAULT_MONITOR_TOLERANCE
    tolerance_scale: float = 1.0
    identity_tolerance_factor: float = DEFAULT_IDENTITY_TOLERANCE_FACTOR
    mask_fraction: float = DEFAULT_MASK_FRACTION
    bump_count: int = DEFAULT_BUMP_COUNT


@dataclass
class VerifySection:
    sample_count: int = 1000
    refinement_levels: int = 2
    s_span: float = 1.0


@dataclass
class OutputSection:
    directory: str = DEFAULT_OUTPUT_DIR
    snapshot_every: int = DEFAULT_SNAPSHOT_EVERY


@dataclass
class ExperimentConfig:
    """A fully validated experiment description."""

    system: SystemSection = field(default_factory=SystemSection)
    grid: GridSection = field(default_factory=GridSection)
    initial_data: InitialDataSection = field(default_factory=InitialDataSection)
    solver: SolverSection = field(default_factory=SolverSection)
    monitors: MonitorSection = field(default_factory=MonitorSection)
    verify: VerifySection = field(default_factory=VerifySection)
    outputs: OutputSection = field(default_factory=OutputSection)
    seed: int = 0
    rate_experiment: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        output_dir: Optional[str] = None,
        tolerance_scale: Optional[float] = None,
    ) -> "ExperimentConfig":
        """Apply command-line overrides."""
        config = self
        if seed is not None:
            config = replace(config, seed=seed)
        if output_dir is not None:
            config = replace(config, outputs=replace(config.outputs, directory=output_dir))
        if tolerance_scale is not None:
            if not (math.isfinite(tolerance_scale) and tolerance_scale > 0):
                raise ConfigError("--tolerance-scale", [("tolerance_scale", 0, "must be positive")])
            monitors = replace(config.monitors, tolerance_scale=config.monitors.tolerance_scale * tolerance_scale)
            config = replace(config, monitors=monitors)
        return config


SECTIONS = {
    "system": SystemSection,
    "grid": GridSection,
    "initial_data": InitialDataSection,
    "solver": SolverSection,
    "monitors": MonitorSection,
    "verify": VerifySection,
    "outputs": OutputSection,
}


# ----------------------------------------------------------------------
# Scalar coercion
# ----------------------------------------------------------------------
def _to_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("expected an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        return int(value.strip())
    raise ValueError(f"expected an integer, got {value!r}")


def _to_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        # YAML 1.1 reads 1e-4 (no dot) as a string
        number = float(value.strip())
    else:
        raise ValueError(f"expected a number, got {value!r}")
    if not math.isfinite(number):
        raise ValueError(f"expected a finite number, got {value!r}")
    return number


def _to_str(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _to_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def _to_float_list(value: Any) -> List[float]:
    if not isinstance(value, list):
        value = [value]
    return [_to_float(v) for v in value]


def _to_int_list(value: Any) -> List[int]:
    if not isinstance(value, list):
        value = [value]
    return [_to_int(v) for v in value]


def _to_matrix(value: Any) -> Union[str, List[List[float]]]:
    if isinstance(value, str):
        if value not in ("ones", "identity"):
            raise ValueError(f"expected a matrix, 'ones' or 'identity', got {value!r}")
        return value
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise ValueError("expected a list of rows")
    return [[_to_float(v) for v in row] for row in value]


FIELD_COERCERS: Dict[str, Dict[str, Callable[[Any], Any]]] = {
    "system": {"space_dim": _to_int, "components": _to_int, "r": _to_float, "coupling": _to_matrix},
    "grid": {"half_extent": _to_float, "points_per_axis": _to_int},
    "initial_data": {
        "kind": _to_str,
        "amplitude": _to_float,
        "width": _to_float,
        "epsilon": _to_float,
        "signs": _to_int_list,
        "values": _to_float_list,
    },
    "solver": {
        "boundary": _to_str,
        "dt_init": _to_float,
        "threshold": _to_float,
        "t_max": _to_float,
        "max_steps": _to_int,
        "ds": _to_float,
        "s_max": _to_float,
        "frame_every": _to_int,
        "T": _to_float,
    },
    "monitors": {
        "ball_radii": _to_float_list,
        "q_values": _to_float_list,
        "cutoff_radii": _to_float_list,
        "tolerance": _to_float,
        "tolerance_scale": _to_float,
        "identity_tolerance_factor": _to_float,
        "mask_fraction": _to_float,
        "bump_count": _to_int,
    },
    "verify": {"sample_count": _to_int, "refinement_levels": _to_int, "s_span": _to_float},
    "outputs": {"directory": _to_str, "snapshot_every": _to_int},
}


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------
def _line_index(node: yaml.Node, prefix: str = "") -> Dict[str, int]:
    """Map dotted key paths to the 1-based line of their key."""
    lines: Dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[path] = key_node.start_mark.line + 1
            lines.update(_line_index(value_node, path))
    return lines


class _Problems:
    def __init__(self, lines: Dict[str, int]) -> None:
        self.lines = lines
        self.items: List[Tuple[str, int, str]] = []

    def add(self, path: str, message: str) -> None:
        key = path
        while key and key not in self.lines:
            key = key.rpartition(".")[0]
        self.items.append((path, self.lines.get(key, 0), message))


def _read_section(name: str, raw: Any, problems: _Problems) -> Any:
    section_cls = SECTIONS[name]
    if raw is None:
        return section_cls()
    if not isinstance(raw, dict):
        problems.add(name, "expected a mapping")
        return section_cls()
    coercers = FIELD_COERCERS[name]
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        path = f"{name}.{key}"
        if key not in coercers:
            problems.add(path, f"unknown key (allowed: {', '.join(coercers)})")
            continue
        if value is None:
            continue
        try:
            values[key] = coercers[key](value)
        except ValueError as exc:
            problems.add(path, str(exc))
    return section_cls(**values)


def _expand_coupling(system: SystemSection) -> SystemSection:
    coupling = system.coupling
    M = system.components
    if coupling == "ones":
        coupling = np.ones((M, M)).tolist()
    elif coupling == "identity":
        coupling = np.eye(M).tolist()
    return replace(system, coupling=coupling)


def _validate(config: ExperimentConfig, problems: _Problems) -> None:
    system = config.system
    if system.space_dim not in (1, 2):
        problems.add("system.space_dim", f"grids support N in {{1, 2}}, got {system.space_dim}")
    if system.components < 1:
        problems.add("system.components", "must be >= 1")
    if not system.r > 0:
        problems.add("system.r", f"must be positive, got {system.r}")
    try:
        matrix = CouplingMatrix(np.array(system.coupling, dtype=float))
        if matrix.size != system.components:
            problems.add("system.coupling", f"must be {system.components}x{system.components}, got {matrix.size}x{matrix.size}")
    except (DomainError, ValueError) as exc:
        problems.add("system.coupling", str(exc))

    grid = config.grid
    n = grid.points_per_axis
    if n < 17 or n % 2 == 0:
        problems.add("grid.points_per_axis", f"must be an odd integer >= 17, got {n}")
    if not grid.half_extent > 0:
        problems.add("grid.half_extent", f"must be positive, got {grid.half_extent}")

    data = config.initial_data
    if data.kind not in PHYSICAL_KINDS + RESCALED_KINDS:
        problems.add("initial_data.kind", f"unknown kind '{data.kind}' (allowed: {', '.join(PHYSICAL_KINDS + RESCALED_KINDS)})")
    if not data.width > 0:
        problems.add("initial_data.width", f"must be positive, got {data.width}")
    if data.signs is not None:
        if len(data.signs) != system.components:
            problems.add("initial_data.signs", f"needs one sign per component ({system.components})")
        if any(s not in (1, -1) for s in data.signs):
            problems.add("initial_data.signs", "entries must be 1 or -1")
    if data.values is not None and len(data.values) != system.components:
        problems.add("initial_data.values", f"needs one value per component ({system.components})")

    solver = config.solver
    if solver.boundary not in BOUNDARIES:
        problems.add("solver.boundary", f"must be one of {', '.join(BOUNDARIES)}")
    for key in ("dt_init", "threshold", "t_max", "ds", "s_max", "T"):
        if not getattr(solver, key) > 0:
            problems.add(f"solver.{key}", "must be positive")
    for key in ("max_steps", "frame_every"):
        if getattr(solver, key) < 1:
            problems.add(f"solver.{key}", "must be >= 1")

    monitors = config.monitors
    L = grid.half_extent
    for radius in monitors.ball_radii:
        if not 0 < radius <= L:
            problems.add("monitors.ball_radii", f"ball radius {radius} must lie in (0, {L}]")
    for radius in monitors.cutoff_radii:
        if not 0 < 2.0 * radius <= L:
            problems.add("monitors.cutoff_radii", f"cutoff support 2*{radius} must fit in half-extent {L}")
    for q in monitors.q_values:
        if q < 2:
            problems.add("monitors.q_values", f"exponent {q} must be >= 2")
    for key in ("tolerance", "tolerance_scale", "identity_tolerance_factor", "mask_fraction"):
        if not getattr(monitors, key) > 0:
            problems.add(f"monitors.{key}", "must be positive")
    if monitors.bump_count < 3 or monitors.bump_count % 3:
        problems.add("monitors.bump_count", "must be a positive multiple of 3")

    verify = config.verify
    if verify.sample_count < 1:
        problems.add("verify.sample_count", "must be >= 1")
    if verify.refinement_levels < 1:
        problems.add("verify.refinement_levels", "must be >= 1")
    if not verify.s_span > 0:
        problems.add("verify.s_span", "must be positive")
    if config.outputs.snapshot_every < 0:
        problems.add("outputs.snapshot_every", "must be >= 0")

    if config.rate_experiment and system.r > 0 and system.space_dim >= 1:
        p = 2.0 * system.r + 1.0
        p_s, _ = sobolev_exponents(system.space_dim)
        if not p_s.exceeds(p):
            problems.add(
                "rate_experiment",
                f"type-I rate experiment requires the subcritical range 1 < p < p_S; p={p:g}, p_S={p_s}",
            )


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """
    Parse and validate a YAML experiment description.

    Raises:
        ConfigError: listing every problem with its line number.
    """
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 0
        raise ConfigError(source, [("<yaml>", line, str(exc).splitlines()[0])]) from exc

    problems = _Problems(_line_index(node) if node is not None else {})
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(source, [("<root>", 1, "expected a mapping at the top level")])

    sections = {}
    for name in SECTIONS:
        sections[name] = _read_section(name, raw.get(name), problems)
    for key in raw:
        if key not in SECTIONS and key not in ("seed", "rate_experiment"):
            problems.add(str(key), "unknown top-level key")

    seed = 0
    rate_experiment = False
    try:
        if raw.get("seed") is not None:
            seed = _to_int(raw["seed"])
    except ValueError as exc:
        problems.add("seed", str(exc))
    try:
        if raw.get("rate_experiment") is not None:
            rate_experiment = _to_bool(raw["rate_experiment"])
    except ValueError as exc:
        problems.add("rate_experiment", str(exc))

    sections["system"] = _expand_coupling(sections["system"])
    config = ExperimentConfig(seed=seed, rate_experiment=rate_experiment, **sections)
    _validate(config, problems)
    if problems.items:
        raise ConfigError(source, problems.items)
    return config


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def dump_config(config: ExperimentConfig, path: Optional[Union[str, Path]] = None) -> str:
    """Serialize a configuration back to YAML (and write it when a path is given)."""
    text = yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


# ----------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------
def system_params(config: ExperimentConfig) -> SystemParams:
    system = config.system
    return SystemParams(
        space_dim=system.space_dim,
        r=system.r,
        coupling=CouplingMatrix(np.array(system.coupling, dtype=float)),
    )


def build_grid(config: ExperimentConfig) -> Grid:
    return Grid(config.system.space_dim, config.grid.half_extent, config.grid.points_per_axis)


def build_initial_field(config: ExperimentConfig, grid: Grid, params: SystemParams) -> Field:
    """
    Initial data on ``grid`` for the configured kind.

    Raises:
        UnsupportedError: for kappa kinds with unequal coupling row sums.
    """
    data = config.initial_data
    M = params.components
    signs = np.array(data.signs if data.signs is not None else [1] * M, dtype=float)
    signs = signs.reshape((M,) + (1,) * grid.space_dim)
    r2 = grid.radius**2
    bump = np.exp(-r2 / data.width**2)

    if data.kind == "zero":
        return Field.zeros(grid, M)
    if data.kind == "constant":
        vector = data.values if data.values is not None else (data.amplitude * signs.ravel()).tolist()
        return Field.constant(grid, vector)
    if data.kind == "gaussian":
        return Field(grid, data.amplitude * signs * bump)
    if data.kind == "dipole":
        return Field(grid, data.amplitude * signs * grid.points[0] * bump)
    kappa = kappa_constant(params).reshape((M,) + (1,) * grid.space_dim)
    if data.kind == "kappa":
        return Field(grid, signs * kappa * np.ones(grid.shape))
    if data.kind == "perturbed_kappa":
        return Field(grid, signs * kappa * (1.0 - data.epsilon * bump))
    raise LabError(f"Unhandled initial data kind '{data.kind}'")
