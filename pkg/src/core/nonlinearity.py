"""
Coupled Power Nonlinearity
==========================

The potential ``G(U) = 1/(2(r+1)) * sum_ij beta_ij |u_i|^(r+1) |u_j|^(r+1)``,
its gradient ``F = grad G``, the sphere constants ``c_G`` / ``C_F`` and the
critical exponents that decide which blow-up regime a parameter set is in.

All evaluators accept a single state vector of length ``M`` or a stack of
states with the component axis first, shape ``(M, ...)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from config import DEFAULT_SPHERE_RESOLUTION, MAX_SPHERE_COMPONENTS
from core.errors import DomainError, LabError, UnsupportedError

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]

# Cap on the total number of dense sphere samples for M >= 3
_MAX_SPHERE_NODES = 2**20


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """
    Symmetric nonnegative coupling matrix with positive diagonal.

    Attributes:
        entries: M x M array of couplings beta_ij (stored read-only).
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise DomainError(f"Coupling matrix must be square and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("Coupling matrix has non-finite entries")
        if np.any(arr < 0):
            raise DomainError("Coupling entries must be nonnegative")
        if np.any(np.diag(arr) <= 0):
            raise DomainError("Coupling diagonal must be strictly positive")
        if not np.array_equal(arr, arr.T):
            raise DomainError("Coupling matrix must be symmetric")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def ones(cls, size: int) -> "CouplingMatrix":
        return cls(np.ones((size, size)))

    @classmethod
    def identity(cls, size: int) -> "CouplingMatrix":
        return cls(np.eye(size))

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    @property
    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def total(self) -> float:
        """Sum of all couplings, the coefficient of the aggregate majorant."""
        return float(self.entries.sum())

    def to_list(self) -> List[List[float]]:
        return self.entries.tolist()


@dataclass(frozen=True)
class SystemParams:
    """
    Dimensions, exponent and coupling of the system.

    Attributes:
        space_dim: Spatial dimension N.
        r: Coupling exponent r > 0, so that p = 2r + 1.
        coupling: The coupling matrix; its size is the component count M.
    """

    space_dim: int
    r: float
    coupling: CouplingMatrix

    def __post_init__(self) -> None:
        if int(self.space_dim) != self.space_dim or self.space_dim < 1:
            raise DomainError(f"space_dim must be a positive integer, got {self.space_dim}")
        if not math.isfinite(self.r) or self.r <= 0:
            raise DomainError(f"r must be positive and finite, got {self.r}")

    @classmethod
    def scalar(cls, space_dim: int, p: float) -> "SystemParams":
        """Single equation u_t - Δu = |u|^(p-1) u."""
        return cls(space_dim=space_dim, r=(p - 1.0) / 2.0, coupling=CouplingMatrix.ones(1))

    @property
    def components(self) -> int:
        return self.coupling.size

    @property
    def p(self) -> float:
        return 2.0 * self.r + 1.0

    @property
    def beta_exp(self) -> float:
        """Similarity exponent 1/(p-1)."""
        return 1.0 / (2.0 * self.r)

    def is_subcritical(self) -> bool:
        p_s, _ = sobolev_exponents(self.space_dim)
        return 1.0 < self.p and p_s.exceeds(self.p)

    def require_subcritical(self) -> None:
        """Raise unless 1 < p < p_S(N)."""
        if not self.is_subcritical():
            p_s, _ = sobolev_exponents(self.space_dim)
            raise DomainError(
                f"Type-I rate requires 1 < p < p_S; got p={self.p!r} with p_S={p_s} for N={self.space_dim}"
            )

    def to_dict(self) -> Dict[str, object]:
        return {
            "space_dim": self.space_dim,
            "components": self.components,
            "r": self.r,
            "p": self.p,
            "beta_exp": self.beta_exp,
            "coupling": self.coupling.to_list(),
        }


@dataclass(frozen=True)
class CriticalExponent:
    """An exponent threshold that may be infinite (value ``None``)."""

    value: Optional[Fraction]

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def exceeds(self, p: Union[float, Fraction]) -> bool:
        """True when ``p`` lies strictly below this threshold."""
        return self.is_infinite or p < self.value

    def __float__(self) -> float:
        return math.inf if self.value is None else float(self.value)

    def __str__(self) -> str:
        return "inf" if self.value is None else str(self.value)

    def to_json(self) -> Union[str, float]:
        return "inf" if self.value is None else float(self.value)


@dataclass(frozen=True)
class StructureConstants:
    """
    Sphere extrema of the nonlinearity.

    Attributes:
        c_G: min of G over the unit sphere.
        C_F: max of |F| over the unit sphere.
        min_direction: Unit vector attaining c_G.
        max_direction: Unit vector attaining C_F.
        resolution: Angular samples per coordinate used.
    """

    c_G: float
    C_F: float
    min_direction: Tuple[float, ...] = field(default=())
    max_direction: Tuple[float, ...] = field(default=())
    resolution: int = 0

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class StructureReport:
    """Maximum relative violation of each structure identity over random samples."""

    sample_count: int
    seed: int
    tolerance: float
    residuals: Dict[str, float]
    checks_passed: List[str]
    checks_failed: List[str]
    status: str

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def _as_state(U: ArrayLike, params: SystemParams) -> np.ndarray:
    arr = np.asarray(U, dtype=float)
    if arr.ndim == 0 or arr.shape[0] != params.components:
        raise DomainError(
            f"State must have leading component axis of length {params.components}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError("State contains non-finite values")
    return arr


def _scalar_or_array(value: np.ndarray) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def eval_G(U: ArrayLike, params: SystemParams) -> Union[float, np.ndarray]:
    """
    Evaluate the potential G nodewise.

    Args:
        U: State of shape (M,) or (M, ...).
        params: System parameters.

    Returns:
        G(U) as a float for a single state, otherwise an array of shape U.shape[1:].
    """
    arr = _as_state(U, params)
    powered = np.abs(arr) ** (params.r + 1.0)
    total = np.einsum("i...,ij,j...->...", powered, params.coupling.entries, powered)
    return _scalar_or_array(total / (2.0 * (params.r + 1.0)))


def eval_F(U: ArrayLike, params: SystemParams) -> np.ndarray:
    """
    Evaluate the gradient F = grad G nodewise.

    Uses beta_ij |u_i|^r sgn(u_i) |u_j|^(r+1) so that u_i = 0 gives F_i = 0
    for every r > 0.
    """
    arr = _as_state(U, params)
    powered = np.abs(arr) ** (params.r + 1.0)
    coupled = np.einsum("ij,j...->i...", params.coupling.entries, powered)
    return np.sign(arr) * np.abs(arr) ** params.r * coupled


def _relative_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)


def _relative_vector_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = np.linalg.norm(a - b, axis=0)
    scale = np.maximum(np.linalg.norm(a, axis=0), np.linalg.norm(b, axis=0))
    return np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)


def _positive_ratio(excess: np.ndarray, scale: np.ndarray) -> np.ndarray:
    excess = np.maximum(excess, 0.0)
    return np.divide(excess, scale, out=np.zeros_like(excess), where=scale > 0)


def check_structure(
    params: SystemParams,
    sample_count: int,
    seed: int,
    constants: Optional[StructureConstants] = None,
    tolerance: float = 1e-12,
) -> StructureReport:
    """
    Check homogeneity, the Euler identity and the sphere sandwich on random samples.

    Args:
        params: System parameters.
        sample_count: Number of random states.
        seed: Seed of the sampler.
        constants: Sphere constants; computed when omitted and M is small enough.
        tolerance: Relative bar for the exact identities.

    Returns:
        StructureReport with the maximum relative violation per identity.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be at least 1")

    rng = np.random.default_rng(seed)
    M = params.components
    p = params.p
    U = rng.standard_normal((M, sample_count))
    lam = rng.uniform(0.0, 3.0, sample_count)
    lam[::10] = 0.0

    G = eval_G(U, params)
    F = eval_F(U, params)
    G_scaled = eval_G(lam * U, params)
    F_scaled = eval_F(lam * U, params)
    norm = np.linalg.norm(U, axis=0)

    residuals: Dict[str, float] = {
        "G_homogeneity": float(np.max(_relative_gap(G_scaled, lam ** (p + 1.0) * G))),
        "F_homogeneity": float(np.max(_relative_vector_gap(F_scaled, lam**p * F))),
        "euler_identity": float(np.max(_relative_gap(np.sum(U * F, axis=0), (p + 1.0) * G))),
    }

    if constants is None and M <= MAX_SPHERE_COMPONENTS:
        constants = structure_constants(params)

    checks_passed: List[str] = []
    checks_failed: List[str] = []

    if constants is not None:
        bound_tol = 1e-9
        residuals["F_upper_bound"] = float(
            np.max(_positive_ratio(np.linalg.norm(F, axis=0) - constants.C_F * norm**p, constants.C_F * norm**p))
        )
        residuals["G_lower_bound"] = float(
            np.max(_positive_ratio(constants.c_G * norm ** (p + 1.0) - G, G))
        )
        residuals["G_upper_bound"] = float(
            np.max(_positive_ratio(G - constants.C_F * norm ** (p + 1.0), constants.C_F * norm ** (p + 1.0)))
        )
    else:
        bound_tol = tolerance
        logger.warning(f"[Structure] sphere constants unavailable for M={M}; bounds not checked")

    for name, value in residuals.items():
        bar = bound_tol if name.endswith("_bound") else tolerance
        if value <= bar:
            checks_passed.append(f"{name}: {value:.3e} <= {bar:.0e}")
        else:
            checks_failed.append(f"{name}: {value:.3e} > {bar:.0e}")

    status = "pass" if not checks_failed else "fail"
    logger.info(f"[Structure] M={M} r={params.r} samples={sample_count} status={status}")
    return StructureReport(
        sample_count=sample_count,
        seed=seed,
        tolerance=tolerance,
        residuals=residuals,
        checks_passed=checks_passed,
        checks_failed=checks_failed,
        status=status,
    )


def _sphere_points(angles: np.ndarray) -> np.ndarray:
    """Map hyperspherical angles of shape (d, K) to unit vectors of shape (d + 1, K)."""
    d, count = angles.shape
    points = np.empty((d + 1, count))
    sin_prod = np.ones(count)
    for k in range(d):
        points[k] = sin_prod * np.cos(angles[k])
        sin_prod = sin_prod * np.sin(angles[k])
    points[d] = sin_prod
    return points


def _refine(objective, start: np.ndarray, step: float, sweeps: int) -> Tuple[np.ndarray, float]:
    """Coordinate-wise bounded golden-section refinement inside one sampling cell."""
    theta = start.copy()
    best = objective(theta)
    upper = math.pi / 2.0
    for _ in range(sweeps):
        for k in range(theta.size):
            lo = max(0.0, theta[k] - step)
            hi = min(upper, theta[k] + step)

            def along(x: float, k: int = k) -> float:
                trial = theta.copy()
                trial[k] = x
                return objective(trial)

            result = minimize_scalar(along, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            if result.fun < best:
                best = float(result.fun)
                theta[k] = float(result.x)
    return theta, best


def structure_constants(
    params: SystemParams, resolution: int = DEFAULT_SPHERE_RESOLUTION
) -> StructureConstants:
    """
    Extremize G and |F| over the unit sphere.

    G and |F| depend on |u_i| only, so the search runs over the closed
    positive orthant of the sphere in hyperspherical angles, first on a
    uniform angular grid and then by golden-section refinement on the best
    cell.

    Args:
        params: System parameters (M <= 4).
        resolution: Angular samples per coordinate (>= 16).

    Returns:
        StructureConstants with c_G and C_F.
    """
    M = params.components
    if M > MAX_SPHERE_COMPONENTS:
        raise UnsupportedError(f"Dense sphere sampling supports M <= {MAX_SPHERE_COMPONENTS}, got M={M}")
    if resolution < 16:
        raise DomainError(f"resolution must be at least 16, got {resolution}")

    if M == 1:
        unit = np.array([1.0])
        c_G = float(eval_G(unit, params))
        C_F = float(abs(eval_F(unit, params)[0]))
        return StructureConstants(c_G=c_G, C_F=C_F, min_direction=(1.0,), max_direction=(1.0,), resolution=resolution)

    d = M - 1
    per_angle = resolution if d == 1 else max(16, min(resolution, int(round(_MAX_SPHERE_NODES ** (1.0 / d)))))
    axis = np.linspace(0.0, math.pi / 2.0, per_angle)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    angles = np.stack([m.ravel() for m in mesh])
    points = _sphere_points(angles)

    g_values = eval_G(points, params)
    f_values = np.linalg.norm(eval_F(points, params), axis=0)
    i_min = int(np.argmin(g_values))
    i_max = int(np.argmax(f_values))

    def g_objective(theta: np.ndarray) -> float:
        return float(eval_G(_sphere_points(theta[:, None])[:, 0], params))

    def f_objective(theta: np.ndarray) -> float:
        return -float(np.linalg.norm(eval_F(_sphere_points(theta[:, None])[:, 0], params)))

    step = axis[1] - axis[0]
    sweeps = 1 if d == 1 else 4
    theta_min, refined_min = _refine(g_objective, angles[:, i_min], step, sweeps)
    theta_max, refined_max = _refine(f_objective, angles[:, i_max], step, sweeps)

    c_G = min(float(g_values[i_min]), refined_min)
    C_F = max(float(f_values[i_max]), -refined_max)
    min_dir = _sphere_points(theta_min[:, None])[:, 0]
    max_dir = _sphere_points(theta_max[:, None])[:, 0]

    if not (0.0 < c_G <= C_F):
        logger.warning(f"[Structure] unexpected sphere constants c_G={c_G} C_F={C_F}")

    logger.debug(f"[Structure] c_G={c_G:.12g} C_F={C_F:.12g} per_angle={per_angle}")
    return StructureConstants(
        c_G=c_G,
        C_F=C_F,
        min_direction=tuple(float(x) for x in min_dir),
        max_direction=tuple(float(x) for x in max_dir),
        resolution=resolution,
    )


def sobolev_exponents(N: int) -> Tuple[CriticalExponent, CriticalExponent]:
    """
    Return (p_S, p_B) for dimension N.

    p_S = (N+2)/(N-2) and p_B = N(N+2)/(N-1)^2 for N >= 3, both infinite for N = 1, 2.
    """
    if int(N) != N or N <= 0:
        raise DomainError(f"Dimension must be a positive integer, got {N}")
    N = int(N)
    if N <= 2:
        return CriticalExponent(None), CriticalExponent(None)
    p_s = Fraction(N + 2, N - 2)
    p_b = Fraction(N * (N + 2), (N - 1) ** 2)
    if not p_s > p_b:
        raise LabError(f"Expected p_S > p_B for N={N}, got {p_s} <= {p_b}")
    return CriticalExponent(p_s), CriticalExponent(p_b)


def exponent_regime(p: float, N: int) -> str:
    """
    Classify p against the critical exponents of dimension N.

    Returns:
        ``"nonnegative_liouville"`` for p < p_B, ``"sign_changing_only"`` for
        p_B <= p < p_S, ``"supercritical"`` for p >= p_S, ``"sublinear"`` for p <= 1.
    """
    if p <= 1.0:
        return "sublinear"
    p_s, p_b = sobolev_exponents(N)
    if not p_s.exceeds(p):
        return "supercritical"
    if p_b.exceeds(p):
        return "nonnegative_liouville"
    return "sign_changing_only"
