"""
Grids, Fields and Weighted Quadrature
=====================================

Truncated uniform grids on [-L, L]^N, M-component fields living on them,
the Gaussian weight rho(y) = exp(-|y|^2/4), rho-weighted quadrature and
norms, finite-difference operators and the smooth cutoff profile.

Field values are stored with the component axis first: shape (M, n) for
N = 1 and (M, n, n) for N = 2. Grids and fields are immutable; every
operation returns new arrays or fields. Reductions go through ``np.sum``,
whose pairwise summation gives a fixed, deterministic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import expit

from core.errors import DomainError, TruncationError, UnsupportedError

Closure = Optional[str]
_CLOSURES = (None, "dirichlet", "neumann")


@dataclass(frozen=True)
class Grid:
    """
    Uniform tensor grid on [-L, L]^N with an odd number of nodes per axis.

    Attributes:
        space_dim: N (1 or 2).
        half_extent: L > 0.
        points_per_axis: n >= 17, odd so that the origin is a node.
    """

    space_dim: int
    half_extent: float
    points_per_axis: int

    def __post_init__(self) -> None:
        if self.space_dim not in (1, 2):
            raise UnsupportedError(f"Grids support N in {{1, 2}}, got N={self.space_dim}")
        if not math.isfinite(self.half_extent) or self.half_extent <= 0:
            raise DomainError(f"half_extent must be positive, got {self.half_extent}")
        n = self.points_per_axis
        if int(n) != n or n < 17 or n % 2 == 0:
            raise DomainError(f"points_per_axis must be an odd integer >= 17, got {n}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / (self.points_per_axis - 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.space_dim

    @cached_property
    def axis(self) -> np.ndarray:
        axis = np.linspace(-self.half_extent, self.half_extent, self.points_per_axis)
        axis[self.points_per_axis // 2] = 0.0
        axis.setflags(write=False)
        return axis

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, ...]:
        mesh = np.meshgrid(*([self.axis] * self.space_dim), indexing="ij")
        return tuple(mesh)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates stacked as shape (N, *shape)."""
        return np.stack(self.coordinates)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points**2, axis=0))

    @cached_property
    def rho(self) -> np.ndarray:
        return gaussian_weight(self.points)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.space_dim):
            index = [slice(None)] * self.space_dim
            index[k] = 0
            mask[tuple(index)] = True
            index[k] = -1
            mask[tuple(index)] = True
        return mask

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def scaled(self, factor: float) -> "Grid":
        """Same node count, half-extent multiplied by ``factor``."""
        return Grid(self.space_dim, self.half_extent * factor, self.points_per_axis)

    def refined(self) -> "Grid":
        """Same extent, spacing halved."""
        return Grid(self.space_dim, self.half_extent, 2 * self.points_per_axis - 1)


@dataclass(frozen=True, eq=False)
class Field:
    """
    M-component grid function.

    Attributes:
        grid: The grid the values live on.
        values: Array of shape (M, *grid.shape), finite, stored read-only.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != self.grid.space_dim + 1 or arr.shape[1:] != self.grid.shape or arr.shape[0] < 1:
            raise DomainError(
                f"Field values must have shape (M, {self.grid.shape}), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError("Field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: Grid, components: int) -> "Field":
        return cls(grid, np.zeros((components,) + grid.shape))

    @classmethod
    def constant(cls, grid: Grid, vector: Sequence[float]) -> "Field":
        vec = np.asarray(vector, dtype=float).reshape((-1,) + (1,) * grid.space_dim)
        return cls(grid, np.broadcast_to(vec, (vec.shape[0],) + grid.shape))

    @property
    def components(self) -> int:
        return int(self.values.shape[0])

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)


@dataclass(frozen=True)
class CutoffProfile:
    """
    Smooth radial cutoff phi(|x - center| / R).

    phi = 1 on [0, R], phi = 0 beyond 2R, with the exponential-bump transition
    h(x) = e^(-1/x) / (e^(-1/x) + e^(-1/(1-x))) in between, which is C^infinity
    and symmetric about |x - center| = 1.5 R.

    Attributes:
        radius: R > 0.
        center: Center point (defaults to the origin).
        transition: Name of the transition profile.
    """

    radius: float
    center: Tuple[float, ...] = field(default=())
    transition: str = "exponential_bump"

    def __post_init__(self) -> None:
        if not math.isfinite(self.radius) or self.radius <= 0:
            raise DomainError(f"Cutoff radius must be positive, got {self.radius}")
        if self.transition != "exponential_bump":
            raise UnsupportedError(f"Unknown cutoff transition '{self.transition}'")

    def center_for(self, space_dim: int) -> np.ndarray:
        if not self.center:
            return np.zeros(space_dim)
        center = np.asarray(self.center, dtype=float)
        if center.shape != (space_dim,):
            raise DomainError(f"Cutoff center must have {space_dim} coordinates, got {self.center}")
        return center


# ----------------------------------------------------------------------
# Weight and quadrature
# ----------------------------------------------------------------------
def gaussian_weight(y: Union[Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """rho(y) = exp(-|y|^2 / 4) for a point of shape (N,) or stacked points (N, ...)."""
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Weight evaluated at a non-finite point")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    value = np.exp(-np.sum(arr**2, axis=0) / 4.0)
    return float(value) if np.ndim(value) == 0 else value


def _check_region(grid: Grid, region_radius: Optional[float]) -> None:
    if region_radius is None:
        return
    if region_radius <= 0:
        raise DomainError(f"Region radius must be positive, got {region_radius}")
    if region_radius > grid.half_extent * (1.0 + 1e-12):
        raise TruncationError(
            f"Ball of radius {region_radius} does not fit in the grid of half-extent {grid.half_extent}"
        )


def quadrature_weights(grid: Grid, region_radius: Optional[float] = None) -> np.ndarray:
    """
    Node weights of the truncated quadrature.

    Without a region these are trapezoidal weights. With a region the weight
    of each node is h^N times the fraction of its cell inside the ball
    |y| <= R (radial estimate, exact in one dimension), so weights are
    nondecreasing in R and reduce to trapezoidal weights at R = L in 1D.

    This is cell coverage, not node inclusion: a node with |y_k| <= R does
    not get its full weight unless its whole cell lies inside the ball, and
    a node just outside keeps the part of its cell that reaches in. Ball
    integrals therefore change continuously with R instead of jumping as R
    crosses a node.
    """
    h = grid.spacing
    edge = np.ones(grid.points_per_axis)
    edge[0] = edge[-1] = 0.5
    box = edge
    for _ in range(grid.space_dim - 1):
        box = np.multiply.outer(box, edge)
    if region_radius is None:
        return box * h**grid.space_dim
    _check_region(grid, region_radius)
    ball = np.clip((region_radius - grid.radius) / h + 0.5, 0.0, 1.0)
    return np.minimum(box, ball) * h**grid.space_dim


def weighted_integral(
    grid: Grid,
    density: np.ndarray,
    region_radius: Optional[float] = None,
    weight: Optional[np.ndarray] = None,
) -> float:
    """
    Integral of a nodal density against rho dy over the grid or a centered ball.

    Args:
        grid: Grid the density lives on.
        density: Array of shape grid.shape.
        region_radius: Optional ball radius.
        weight: Optional extra nodal factor (e.g. phi^2).
    """
    integrand = quadrature_weights(grid, region_radius) * grid.rho * density
    if weight is not None:
        integrand = integrand * weight
    return float(np.sum(integrand))


def pointwise_norm(values: np.ndarray) -> np.ndarray:
    """Euclidean norm across the component axis."""
    return np.sqrt(np.sum(values**2, axis=0))


def weighted_lebesgue_norm(f: Field, q: float, region_radius: Optional[float] = None) -> float:
    """(integral of |f|^q rho dy)^(1/q) over the grid or the ball B_R."""
    if q < 1:
        raise DomainError(f"Lebesgue exponent must be >= 1, got {q}")
    total = weighted_integral(f.grid, pointwise_norm(f.values) ** q, region_radius)
    return total ** (1.0 / q)


def weighted_sobolev_norm(f: Field, beta_exp: float, region_radius: Optional[float] = None) -> float:
    """(integral of (|grad f|^2 + beta |f|^2) rho dy)^(1/2) with central differences."""
    grad = gradient_values(f.values, f.grid)
    density = np.sum(grad**2, axis=(0, 1)) + beta_exp * np.sum(f.values**2, axis=0)
    return math.sqrt(max(weighted_integral(f.grid, density, region_radius), 0.0))


def sup_norm(f: Field) -> float:
    """Max over nodes of the Euclidean component norm."""
    return float(np.max(pointwise_norm(f.values)))


# ----------------------------------------------------------------------
# Difference operators
# ----------------------------------------------------------------------
def _check_closure(closure: Closure) -> None:
    if closure not in _CLOSURES:
        raise DomainError(f"Unknown boundary closure '{closure}'")


def _second_difference(values: np.ndarray, h: float, axis: int, closure: Closure) -> np.ndarray:
    v = np.moveaxis(values, axis, -1)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., :-2] - 2.0 * v[..., 1:-1] + v[..., 2:]) / h**2
    if closure == "neumann":
        out[..., 0] = 2.0 * (v[..., 1] - v[..., 0]) / h**2
        out[..., -1] = 2.0 * (v[..., -2] - v[..., -1]) / h**2
    elif closure == "dirichlet":
        out[..., 0] = 0.0
        out[..., -1] = 0.0
    else:
        out[..., 0] = (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / h**2
        out[..., -1] = (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / h**2
    return np.moveaxis(out, -1, axis)


def laplacian_values(values: np.ndarray, grid: Grid, closure: Closure = None) -> np.ndarray:
    """
    Discrete Laplacian of an (M, *shape) array.

    Central differences in the interior. At the boundary: one-sided
    second-order stencils (``closure=None``), reflective ghost nodes
    (``"neumann"``), or zero rate on every boundary node (``"dirichlet"``).
    """
    _check_closure(closure)
    h = grid.spacing
    total = np.zeros_like(values)
    for k in range(grid.space_dim):
        total = total + _second_difference(values, h, k + 1, closure)
    if closure == "dirichlet":
        total[:, grid.boundary_mask] = 0.0
    return total


def gradient_values(values: np.ndarray, grid: Grid, closure: Closure = None) -> np.ndarray:
    """
    Discrete gradient of an (M, *shape) array, returned as shape (N, M, *shape).

    Central differences in the interior, second-order one-sided at the
    boundary; ``"neumann"`` sets the normal derivative to zero there.
    """
    _check_closure(closure)
    h = grid.spacing
    parts = []
    for k in range(grid.space_dim):
        part = np.gradient(values, h, axis=k + 1, edge_order=2)
        if closure == "neumann":
            part = np.moveaxis(part, k + 1, -1).copy()
            part[..., 0] = 0.0
            part[..., -1] = 0.0
            part = np.moveaxis(part, -1, k + 1)
        parts.append(part)
    return np.stack(parts)


def laplacian(f: Field, closure: Closure = None) -> Field:
    return f.with_values(laplacian_values(f.values, f.grid, closure))


def gradient(f: Field, closure: Closure = None) -> np.ndarray:
    """Gradient as an array of shape (N, M, *shape)."""
    return gradient_values(f.values, f.grid, closure)


def drift_values(values: np.ndarray, grid: Grid, closure: Closure = None) -> np.ndarray:
    """y . grad w for an (M, *shape) array."""
    grad = gradient_values(values, grid, closure)
    return np.einsum("k...,km...->m...", grid.points, grad)


def weighted_divergence(f: Field) -> np.ndarray:
    """
    Compact flux form of div(rho grad w) at interior nodes (zero on the boundary).

    Fluxes rho_(i+1/2) (w_(i+1) - w_i) / h use the weight at cell midpoints.
    """
    grid = f.grid
    h = grid.spacing
    out = np.zeros_like(f.values)
    for k in range(grid.space_dim):
        v = np.moveaxis(f.values, k + 1, -1)
        mid_points = grid.points.copy()
        mid_points[k] = mid_points[k] + 0.5 * h
        rho_mid = np.moveaxis(gaussian_weight(mid_points), k, -1)[..., :-1]
        flux = rho_mid * (v[..., 1:] - v[..., :-1]) / h
        div = np.zeros_like(v)
        div[..., 1:-1] = (flux[..., 1:] - flux[..., :-1]) / h
        out = out + np.moveaxis(div, -1, k + 1)
    out[:, grid.boundary_mask] = 0.0
    return out


# ----------------------------------------------------------------------
# Cutoff profile
# ----------------------------------------------------------------------
def profile_derivatives(t: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """phi(t), phi'(t), phi''(t) of the unit profile (flat to 1, vanishing beyond 2)."""
    shape = np.shape(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    value = np.where(t <= 1.0, 1.0, 0.0)
    first = np.zeros_like(t)
    second = np.zeros_like(t)
    inside = (t > 1.0) & (t < 2.0)
    if np.any(inside):
        x = 2.0 - t[inside]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            g = 1.0 / x - 1.0 / (1.0 - x)
            dg = -1.0 / x**2 - 1.0 / (1.0 - x) ** 2
            d2g = 2.0 / x**3 - 2.0 / (1.0 - x) ** 3
            h = expit(-g)
            spread = h * expit(g)
            dh = -spread * dg
            d2h = -((1.0 - 2.0 * h) * dh * dg + spread * d2g)
        value[inside] = h
        first[inside] = -np.nan_to_num(dh)
        second[inside] = np.nan_to_num(d2h)
    return value.reshape(shape), first.reshape(shape), second.reshape(shape)


def cutoff_value(profile: CutoffProfile, x: Union[Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """phi(|x - center| / R) for a point of shape (N,) or stacked points (N, ...)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    center = profile.center_for(arr.shape[0]).reshape((-1,) + (1,) * (arr.ndim - 1))
    t = np.sqrt(np.sum((arr - center) ** 2, axis=0)) / profile.radius
    value, _, _ = profile_derivatives(t)
    return float(value) if np.ndim(value) == 0 else value


def require_support(profile: CutoffProfile, grid: Grid) -> None:
    """Raise unless the support of the cutoff lies inside the grid."""
    center = profile.center_for(grid.space_dim)
    reach = np.max(np.abs(center)) + 2.0 * profile.radius
    if reach > grid.half_extent * (1.0 + 1e-12):
        raise TruncationError(
            f"Cutoff support (center {tuple(center)}, radius 2*{profile.radius}) exceeds half-extent {grid.half_extent}"
        )


def _cutoff_geometry(profile: CutoffProfile, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    center = profile.center_for(grid.space_dim).reshape((-1,) + (1,) * grid.space_dim)
    offset = grid.points - center
    r = np.sqrt(np.sum(offset**2, axis=0))
    return offset, r


def cutoff_field(profile: CutoffProfile, grid: Grid) -> np.ndarray:
    """Nodal values of the cutoff, shape grid.shape."""
    _, r = _cutoff_geometry(profile, grid)
    value, _, _ = profile_derivatives(r / profile.radius)
    return value


def cutoff_gradient(profile: CutoffProfile, grid: Grid) -> np.ndarray:
    """Analytic gradient of the cutoff, shape (N, *grid.shape)."""
    offset, r = _cutoff_geometry(profile, grid)
    _, first, _ = profile_derivatives(r / profile.radius)
    radial = np.divide(first / profile.radius, r, out=np.zeros_like(r), where=r > 0)
    return offset * radial


def cutoff_laplacian(profile: CutoffProfile, grid: Grid) -> np.ndarray:
    """Analytic Laplacian phi'' / R^2 + (N - 1) phi' / (R r) of the cutoff."""
    _, r = _cutoff_geometry(profile, grid)
    _, first, second = profile_derivatives(r / profile.radius)
    curvature = np.divide(
        (grid.space_dim - 1) * first / profile.radius, r, out=np.zeros_like(r), where=r > 0
    )
    return second / profile.radius**2 + curvature


# ----------------------------------------------------------------------
# Interpolation and I/O
# ----------------------------------------------------------------------
def interpolate(f: Field, points: np.ndarray) -> np.ndarray:
    """
    Multilinear interpolation of a field at stacked points of shape (N, ...).

    Returns:
        Array of shape (M, ...).

    Raises:
        TruncationError: if a point lies outside the grid.
    """
    grid = f.grid
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] != grid.space_dim:
        raise DomainError(f"Points must have leading axis of length {grid.space_dim}, got {pts.shape}")
    slack = 1e-9 * grid.spacing
    if np.any(np.abs(pts) > grid.half_extent + slack):
        worst = float(np.max(np.abs(pts)))
        raise TruncationError(
            f"Interpolation point at distance {worst:.6g} outside grid half-extent {grid.half_extent}"
        )
    pts = np.clip(pts, -grid.half_extent, grid.half_extent)
    flat = pts.reshape(grid.space_dim, -1).T
    axes = (grid.axis,) * grid.space_dim
    out = np.empty((f.components, flat.shape[0]))
    for i in range(f.components):
        out[i] = RegularGridInterpolator(axes, f.values[i], method="linear")(flat)
    return out.reshape((f.components,) + pts.shape[1:])


def resample(f: Field, target: Grid) -> Field:
    """Interpolate a field onto another grid."""
    return Field(target, interpolate(f, target.points))


def write_field(path: Union[str, Path], f: Field) -> Path:
    """
    Write a field as text: header ``N,M,n,L`` then one row per component
    with that component's node values in row-major order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = f.grid
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{grid.space_dim},{f.components},{grid.points_per_axis},{grid.half_extent:.17g}\n")
        np.savetxt(handle, f.values.reshape(f.components, -1), delimiter=",", fmt="%.17g")
    return path


def read_field(path: Union[str, Path]) -> Field:
    """Inverse of :func:`write_field`."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        if len(header) != 4:
            raise DomainError(f"{path}: malformed field header {header}")
        N, M, n = (int(x) for x in header[:3])
        L = float(header[3])
        data = np.loadtxt(handle, delimiter=",", ndmin=2)
    grid = Grid(N, L, n)
    if data.shape != (M, n**N):
        raise DomainError(f"{path}: expected {M} rows of {n**N} values, got {data.shape}")
    return Field(grid, data.reshape((M,) + grid.shape))

