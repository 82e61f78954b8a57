"""
Similarity Variables
====================

The change of variables W(y, s) = (T - t)^(1/(p-1)) U(a + sqrt(T - t) y, t),
s = -log(T - t), and direct RK4 integration of the rescaled system

    W_s = ΔW - y/2 . ∇W - W/(p-1) + F(W).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import DEFAULT_FRAME_EVERY, DEFAULT_HALF_EXTENT, RK4_STABILITY_RADIUS
from core.errors import DomainError, InstabilityError, ResamplingError, UnsupportedError
from core.grid import (
    Closure,
    Field,
    Grid,
    drift_values,
    interpolate,
    laplacian_values,
    read_field,
    sup_norm,
    write_field,
)
from core.nonlinearity import SystemParams, eval_F
from solvers.integrators import rk4_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelfSimilarFrame:
    """
    Rescaled field at one rescaled time.

    Attributes:
        center: Blow-up point a.
        T: Blow-up time (> 0).
        s: Rescaled time, -log(T - t).
        W: Field on the y-grid.
    """

    center: Tuple[float, ...]
    T: float
    s: float
    W: Field

    def __post_init__(self) -> None:
        if not (math.isfinite(self.T) and self.T > 0):
            raise DomainError(f"Blow-up time must be positive, got {self.T}")
        if not math.isfinite(self.s) or math.exp(-self.s) > self.T * (1.0 + 1e-12):
            raise DomainError(f"Rescaled time s={self.s} requires T - t = e^(-s) <= T={self.T}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != self.W.grid.space_dim:
            raise DomainError(f"Center {self.center} does not match N={self.W.grid.space_dim}")

    @property
    def t(self) -> float:
        """Originating physical time T - e^(-s)."""
        return self.T - math.exp(-self.s)

    @property
    def grid(self) -> Grid:
        return self.W.grid

    def with_field(self, W: Field, s: float) -> "SelfSimilarFrame":
        return SelfSimilarFrame(self.center, self.T, s, W)


@dataclass
class RescaledTrajectory:
    """
    Frames of one rescaled run, in increasing s.

    Attributes:
        frames: The stored frames.
        ds: Integration step in s.
        frame_every: Steps between stored frames.
    """

    frames: List[SelfSimilarFrame]
    ds: float
    frame_every: int = 1
    accepted_steps: int = 0
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.frames:
            raise DomainError("A rescaled trajectory needs at least one frame")
        if np.any(np.diff(self.s) <= 0):
            raise DomainError("Frame times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[SelfSimilarFrame]:
        return iter(self.frames)

    def __getitem__(self, index: int) -> SelfSimilarFrame:
        return self.frames[index]

    @property
    def s(self) -> np.ndarray:
        return np.array([frame.s for frame in self.frames])

    @property
    def grid(self) -> Grid:
        return self.frames[0].grid

    def uniform_spacing(self, rtol: float = 1e-9) -> float:
        """Common spacing of the frame times; ResamplingError if they are not uniform."""
        if len(self.frames) < 2:
            raise ResamplingError("A single frame has no spacing")
        gaps = np.diff(self.s)
        spacing = float(np.mean(gaps))
        if np.max(np.abs(gaps - spacing)) > rtol * spacing:
            raise ResamplingError(
                f"Frames are not uniformly spaced in s (gaps from {gaps.min():.6g} to {gaps.max():.6g})"
            )
        return spacing

    @classmethod
    def from_fields(
        cls,
        fields: Sequence[Field],
        s0: float,
        spacing: float,
        T: float = 1.0,
        center: Optional[Sequence[float]] = None,
    ) -> "RescaledTrajectory":
        """Wrap precomputed fields sampled at s0, s0 + spacing, ..."""
        N = fields[0].grid.space_dim
        center = tuple(center) if center is not None else (0.0,) * N
        frames = [SelfSimilarFrame(center, T, s0 + k * spacing, W) for k, W in enumerate(fields)]
        return cls(frames=frames, ds=spacing, frame_every=1)


# ----------------------------------------------------------------------
# Change of variables
# ----------------------------------------------------------------------
def _center_array(a: Union[float, Sequence[float]], space_dim: int) -> np.ndarray:
    center = np.atleast_1d(np.asarray(a, dtype=float))
    if center.shape != (space_dim,):
        raise DomainError(f"Center must have {space_dim} coordinates, got {a}")
    return center


def to_selfsimilar(
    U: Field,
    t: float,
    a: Union[float, Sequence[float]],
    T: float,
    params: SystemParams,
    y_grid: Optional[Grid] = None,
) -> SelfSimilarFrame:
    """
    Rescale a physical field around (a, T).

    Args:
        U: Field at time t on the physical grid.
        t: Physical time, 0 <= t < T.
        a: Center point.
        T: Blow-up time.
        params: System parameters.
        y_grid: Target grid; defaults to half-extent 10 with the node count of U's grid.

    Raises:
        TruncationError: if an image point a + sqrt(T - t) y leaves the physical grid.
    """
    if not (0 <= t < T):
        raise DomainError(f"Need 0 <= t < T, got t={t}, T={T}")
    N = U.grid.space_dim
    center = _center_array(a, N)
    y_grid = y_grid or Grid(N, DEFAULT_HALF_EXTENT, U.grid.points_per_axis)
    tau = T - t
    image = center.reshape((-1,) + (1,) * N) + math.sqrt(tau) * y_grid.points
    values = tau**params.beta_exp * interpolate(U, image)
    return SelfSimilarFrame(tuple(center), T, -math.log(tau), Field(y_grid, values))


def from_selfsimilar(
    frame: SelfSimilarFrame,
    params: SystemParams,
    x_grid: Optional[Grid] = None,
) -> Tuple[Field, float]:
    """
    Map a frame back to physical variables.

    The default x-grid is the y-grid scaled by sqrt(T - t), which covers
    the frame only for a centered frame; pass ``x_grid`` otherwise.

    Returns:
        (U, t) with t = T - e^(-s).
    """
    tau = math.exp(-frame.s)
    N = frame.grid.space_dim
    root = math.sqrt(tau)
    x_grid = x_grid or frame.grid.scaled(root)
    center = np.asarray(frame.center).reshape((-1,) + (1,) * N)
    values = tau ** (-params.beta_exp) * interpolate(frame.W, (x_grid.points - center) / root)
    return Field(x_grid, values), frame.t


def write_frame(path: Union[str, Path], frame: SelfSimilarFrame) -> Path:
    """Field payload in the grid text format plus a JSON sidecar with (a, T, s)."""
    path = write_field(path, frame.W)
    meta = {"center": list(frame.center), "T": frame.T, "s": frame.s}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_frame(path: Union[str, Path]) -> SelfSimilarFrame:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return SelfSimilarFrame(tuple(meta["center"]), float(meta["T"]), float(meta["s"]), read_field(path))


# ----------------------------------------------------------------------
# Rescaled evolution
# ----------------------------------------------------------------------
def _rescaled_values(values: np.ndarray, grid: Grid, params: SystemParams, closure: Closure) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise InstabilityError("Non-finite values inside a rescaled Runge-Kutta stage")
    with np.errstate(over="ignore", invalid="ignore"):
        out = (
            laplacian_values(values, grid, closure)
            - 0.5 * drift_values(values, grid, closure)
            - params.beta_exp * values
            + eval_F(values, params)
        )
    if closure == "dirichlet":
        out[:, grid.boundary_mask] = 0.0
    return out


def rhs_rescaled(W: Field, params: SystemParams, closure: Closure = "dirichlet") -> Field:
    """W_s = ΔW - y/2 . ∇W - W/(p-1) + F(W), central differences in the interior."""
    return W.with_values(_rescaled_values(W.values, W.grid, params, closure))


def rescaled_stability_limit(grid: Grid) -> float:
    """Largest RK4 step for the discrete Δ - y/2 . ∇ on this grid."""
    h = grid.spacing
    N = grid.space_dim
    spectral_radius = 4.0 * N / h**2 + N * grid.half_extent / (2.0 * h)
    return RK4_STABILITY_RADIUS / spectral_radius


def step_rescaled(
    frame: SelfSimilarFrame,
    ds: float,
    params: SystemParams,
    closure: Closure = "dirichlet",
) -> SelfSimilarFrame:
    """
    One RK4 step in s.

    Raises:
        DomainError: if ds is not positive or exceeds the stability limit.
        InstabilityError: if the step produces non-finite values.
    """
    limit = rescaled_stability_limit(frame.grid)
    if not (ds > 0) or ds > limit * (1.0 + 1e-12):
        raise DomainError(f"Rescaled step {ds} outside (0, {limit:.6g}]")
    grid = frame.grid
    with np.errstate(over="ignore", invalid="ignore"):
        new = rk4_step(frame.W.values, ds, lambda v: _rescaled_values(v, grid, params, closure))
    if not np.all(np.isfinite(new)):
        raise InstabilityError(f"Non-finite values after a rescaled step at s={frame.s:.6g}")
    return frame.with_field(Field(grid, new), frame.s + ds)


def evolve_rescaled(
    frame: SelfSimilarFrame,
    ds: float,
    s_span: float,
    params: SystemParams,
    frame_every: int = DEFAULT_FRAME_EVERY,
    closure: Closure = "dirichlet",
) -> RescaledTrajectory:
    """
    Integrate over [s0, s0 + s_span] and keep every ``frame_every``-th frame.

    Frame times are computed as s0 + k * ds from the step count, so the
    stored frames are uniformly spaced by frame_every * ds.
    """
    if s_span <= 0 or frame_every < 1:
        raise DomainError("s_span must be positive and frame_every >= 1")
    steps = int(round(s_span / ds))
    if steps < 1:
        raise DomainError(f"s_span={s_span} is shorter than one step ds={ds}")
    s0 = frame.s
    frames = [frame]
    current = frame
    logger.info(
        f"[RescaledSolver] Evolving {steps} steps of ds={ds:g} from s={s0:g} "
        f"(n={frame.grid.points_per_axis}, L={frame.grid.half_extent:g}, closure={closure})"
    )
    for k in range(1, steps + 1):
        current = step_rescaled(current, ds, params, closure)
        current = current.with_field(current.W, s0 + k * ds)
        if k % frame_every == 0:
            frames.append(current)
    logger.info(f"[RescaledSolver] Done: {len(frames)} frames, final sup={sup_norm(current.W):.6g}")
    return RescaledTrajectory(frames=frames, ds=ds, frame_every=frame_every, accepted_steps=steps)


def kappa_constant(params: SystemParams) -> np.ndarray:
    """
    Equal-component constant solution of the rescaled system.

    Raises:
        UnsupportedError: if the coupling rows have different sums.
    """
    sums = params.coupling.row_sums
    if not np.allclose(sums, sums[0], rtol=1e-12, atol=0.0):
        raise UnsupportedError(f"Equal-component constants need equal coupling row sums, got {sums.tolist()}")
    value = (params.beta_exp / float(sums[0])) ** (1.0 / (params.p - 1.0))
    return np.full(params.components, value)
