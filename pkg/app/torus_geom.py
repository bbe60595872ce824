"""Differential geometry of embedded tori.

An :class:`Embedding` wraps K: T² → R³ and caches its frame on the grid:
DK (3x2), the normal n = ∂₁K × ∂₂K, |n|², the metric G = DKᵀDK and G⁻¹.
Grid arrays keep component axes first, e.g. DK values have shape (3, 2, N₁, N₂)
with DK[i, a] = ∂_a K_i.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from .config import SolverConfig
from .exceptions import DegenerateAlpha, GeometryError
from .smalldiv import solve_cohomological
from .spectral import Grid, TorusMat, TorusScalar, TorusVec, from_values

if TYPE_CHECKING:
    from .fields.base import AmbientField

logger = logging.getLogger(__name__)

_IMMERSION_FLOOR = 1e-12
_ALPHA_CONDITION_LIMIT = 1e12


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of grid vector arrays with the component axis first."""
    return np.cross(a, b, axis=0)


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("i...,i...->...", a, b)


def inverse_2x2(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse and determinant of a grid field of 2x2 matrices (shape (2, 2, ...))."""
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    inv = np.empty_like(m)
    inv[0, 0] = m[1, 1] / det
    inv[1, 1] = m[0, 0] / det
    inv[0, 1] = -m[0, 1] / det
    inv[1, 0] = -m[1, 0] / det
    return inv, det


class Embedding:
    """
    Embedded torus K: T² → R³ with its frame cached on the grid.

    Raises:
        GeometryError: If K is not an immersion or the metric is not positive definite
    """

    def __init__(self, K: TorusVec):
        if K.shape != (3,):
            raise GeometryError(f"embedding needs three components, got {K.shape}")
        self.K = K
        self.DK = K.gradient()
        self._k = K.values()
        self._dk = self.DK.values()
        self._n = cross(self._dk[:, 0], self._dk[:, 1])
        self._n_sq = dot(self._n, self._n)
        self._g = np.einsum("iaxy,ibxy->abxy", self._dk, self._dk)
        self._g_inv, det = inverse_2x2(self._g)

        scale = max(float(np.max(self._n_sq)), 1e-300)
        if float(np.min(self._n_sq)) <= _IMMERSION_FLOOR**2 * scale:
            raise GeometryError("embedding is not an immersion: |n| vanishes on the grid")
        if np.min(det) <= 0 or np.min(self._g[0, 0]) <= 0:
            raise GeometryError("induced metric is not positive definite")

        self.n = TorusVec.from_values(self._n)
        self.n_sq = TorusScalar.from_values(self._n_sq)
        self.G = TorusMat.from_values(self._g)
        self.G_inv = TorusMat.from_values(self._g_inv)

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Embedding":
        return cls(TorusVec.from_values(values))

    @property
    def grid(self) -> Grid:
        return self.K.grid

    # grid values

    @property
    def k_values(self) -> np.ndarray:
        return self._k

    @property
    def dk_values(self) -> np.ndarray:
        return self._dk

    @property
    def n_values(self) -> np.ndarray:
        return self._n

    @property
    def n_sq_values(self) -> np.ndarray:
        return self._n_sq

    @property
    def g_values(self) -> np.ndarray:
        return self._g

    @property
    def g_inv_values(self) -> np.ndarray:
        return self._g_inv

    def points(self) -> np.ndarray:
        """Grid points as an array of shape (N₁, N₂, 3)."""
        return np.moveaxis(self._k, 0, -1)

    # off-grid evaluation

    def point_at(self, angles: np.ndarray) -> np.ndarray:
        """K at angles of shape (P, 2); returns (P, 3)."""
        return self.K.evaluate_at(angles)

    def tangent_at(self, angles: np.ndarray) -> np.ndarray:
        """DK at angles of shape (P, 2); returns (P, 3, 2)."""
        return self.DK.evaluate_at(angles)

    # fields along the torus

    def field_values(self, field: "AmbientField") -> np.ndarray:
        """B∘K on the grid, shape (3, N₁, N₂)."""
        return np.moveaxis(field.evaluate(self.points()), -1, 0)

    def jacobian_values(self, field: "AmbientField") -> np.ndarray:
        """DB∘K on the grid, shape (3, 3, N₁, N₂)."""
        return np.moveaxis(field.jacobian(self.points()), (-2, -1), (0, 1))

    def tangential(self, vectors: np.ndarray) -> np.ndarray:
        """Frame coordinates G⁻¹DKᵀV of grid vectors V (shape (3, N₁, N₂))."""
        return np.einsum("abxy,ibxy,ixy->axy", self._g_inv, self._dk, vectors)

    def push(self, coordinates: np.ndarray) -> np.ndarray:
        """DK·ξ for tangent coordinates ξ of shape (2, N₁, N₂)."""
        return np.einsum("iaxy,axy->ixy", self._dk, coordinates)

    # global quantities

    @property
    def enclosed_volume(self) -> float:
        """Signed volume (4π²/3)[K·n]; positive when n points outward."""
        return float(4 * np.pi**2 / 3 * np.mean(dot(self._k, self._n)))

    @property
    def orientation(self) -> int:
        return 1 if self.enclosed_volume > 0 else -1

    @property
    def mean_normal_length(self) -> float:
        """[|n|]."""
        return float(np.mean(np.sqrt(self._n_sq)))

    def resize(self, grid: Grid) -> "Embedding":
        return Embedding(self.K.resize(grid))

    def displaced(self, delta: np.ndarray) -> "Embedding":
        """Embedding K + Δ for grid values Δ of shape (3, N₁, N₂)."""
        return Embedding(TorusVec.from_values(self._k + delta))

    def __repr__(self) -> str:
        return f"Embedding(grid={self.grid}, volume={self.enclosed_volume:.6g})"


def _omega(omega) -> np.ndarray:
    return np.asarray(getattr(omega, "omega", omega), dtype=float)


def invariance_error(K: Embedding, omega, field: "AmbientField") -> TorusVec:
    """Defect of invariance E = L_ω K − B∘K."""
    w = _omega(omega)
    values = np.einsum("iaxy,a->ixy", K.dk_values, w) - K.field_values(field)
    return TorusVec.from_values(values)


def solvability_average(K: Embedding, error: TorusVec) -> float:
    """[nᵀE], which vanishes for divergence-free fields."""
    return float(np.mean(dot(K.n_values, error.values())))


def frame_decompose(K: Embedding, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Coordinates of grid vectors in the frame (DK, n/|n|²).

    Returns:
        (ξ₁, ξ₂) with ξ₁ = G⁻¹DKᵀV of shape (2, N₁, N₂) and ξ₂ = nᵀV
    """
    return K.tangential(vectors), dot(K.n_values, vectors)


def frame_compose(K: Embedding, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
    """DKξ₁ + nξ₂/|n|²."""
    return K.push(xi1) + K.n_values * (xi2 / K.n_sq_values)


def _average_twist(A: np.ndarray, omega: np.ndarray) -> float:
    means = A.mean(axis=(-2, -1))
    return float(means[0] * omega[1] - means[1] * omega[0])


def twist_matrix(K: Embedding, field: "AmbientField") -> np.ndarray:
    """Grid values of A = −G⁻¹DKᵀ(DBᵀ + DB)n/|n|², shape (2, N₁, N₂)."""
    jb = K.jacobian_values(field)
    sym = jb + np.swapaxes(jb, 0, 1)
    s = np.einsum("ijxy,jxy->ixy", sym, K.n_values)
    return -K.tangential(s) / K.n_sq_values


def twist_data(K: Embedding, omega, field: "AmbientField") -> tuple[TorusVec, float]:
    """
    Twist function A and twist constant T = [A₁]ω₂ − [A₂]ω₁.

    Returns:
        (A, T)
    """
    w = _omega(omega)
    A = twist_matrix(K, field)
    return TorusVec.from_values(A), _average_twist(A, w)


def tangential_cross(K: Embedding, field_values: np.ndarray) -> np.ndarray:
    """
    Solve DKα = B×n at every node.

    Raises:
        DegenerateAlpha: If the metric is too ill-conditioned for the solve
    """
    g = K.g_values
    trace = g[0, 0] + g[1, 1]
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    if np.min(det) <= trace.max() ** 2 / _ALPHA_CONDITION_LIMIT:
        raise DegenerateAlpha()
    rhs = cross(field_values, K.n_values)
    alpha = K.tangential(rhs)
    residual = np.max(np.abs(K.push(alpha) - rhs))
    if residual > 1e-9 * max(1.0, float(np.max(np.abs(rhs)))):
        raise DegenerateAlpha(f"tangential solve residual {residual:.3e} above 1e-9")
    return alpha


def twist_beltrami(K: Embedding, omega, field: "AmbientField", lam: float):
    """
    Twist data specialized to Beltrami fields curl B = λB.

    Uses A = 2G⁻¹DKᵀL_ω n/|n|² − λα/|n|², with DKα = B×n, and the function
    F = α·ω^⊥/|ω|, which is positive on invariant tori.

    Returns:
        (A, T, F)

    Raises:
        DegenerateAlpha: If α cannot be solved for, or F vanishes on the grid
    """
    w = _omega(omega)
    perp = np.array([w[1], -w[0]])
    l_n = K.n.l_omega(w).values()
    alpha = tangential_cross(K, K.field_values(field))
    A = 2 * K.tangential(l_n) / K.n_sq_values - lam * alpha / K.n_sq_values
    F = np.einsum("axy,a->xy", alpha, perp) / np.linalg.norm(w)
    if np.min(np.abs(F)) <= 0 or np.min(F) * np.max(F) <= 0:
        raise DegenerateAlpha("F = α·ω⊥/|ω| vanishes on the grid")
    return TorusVec.from_values(A), _average_twist(A, w), TorusScalar.from_values(F)


@dataclass(frozen=True)
class TwistUpdate:
    """
    Dependence of the twist of a torus on the Beltrami factor.

    T(λ) = geometric − λ·a, so the factor λ* = geometric/a annihilates the twist.
    """

    geometric: float
    a: float
    current: float
    lam: float

    @property
    def forbidden(self) -> float:
        return self.lam + self.current / self.a

    def gap(self, factor: Optional[float] = None) -> float:
        factor = SolverConfig.equilibria().lambda_gap_factor if factor is None else factor
        return factor * abs(self.current / self.a)

    def twist_for(self, lam: float) -> float:
        return self.geometric - lam * self.a


def twist_update_coefficients(K: Embedding, omega, field: "AmbientField", lam: float):
    """Split the Beltrami twist into its geometric part and the coefficient a = [α·ω⊥/|n|²]."""
    w = _omega(omega)
    perp = np.array([w[1], -w[0]])
    l_n = K.n.l_omega(w).values()
    alpha = tangential_cross(K, K.field_values(field))
    geometric = _average_twist(2 * K.tangential(l_n) / K.n_sq_values, w)
    a = float(np.mean(np.einsum("axy,a->xy", alpha, perp) / K.n_sq_values))
    if a == 0.0:
        raise DegenerateAlpha("twist coefficient a vanishes")
    current = geometric - lam * a
    return TwistUpdate(geometric=geometric, a=a, current=current, lam=float(lam))


def nondeg_type_II(
    K: Embedding, omega, field: "AmbientField", lam: float, normalized: bool = False
) -> float:
    """
    Type-II certificate T + λ[α·ω^⊥/|n|²].

    The value scales with the square of the field strength; ``normalized``
    divides by |ω|², which makes it invariant under B → σB.
    """
    w = _omega(omega)
    update = twist_update_coefficients(K, w, field, lam)
    value = update.current + lam * update.a
    if normalized:
        value /= float(w @ w)
    return float(value)


def type_I_potential(
    metric: Union[Embedding, TorusMat], omega, X: Optional[TorusVec] = None
) -> tuple[TorusScalar, np.ndarray, np.ndarray]:
    """
    Normalize X so [|X|²] = 1 and solve L_ω R = 1 − |X|².

    Returns:
        (R, normalized ω, grid values of the normalized |X|²)
    """
    g = metric.g_values if isinstance(metric, Embedding) else metric.values()
    w = _omega(omega)
    if X is None:
        x = np.broadcast_to(w[:, None, None], (2, *g.shape[-2:]))
    else:
        x = X.values()
    norm_sq = np.einsum("axy,abxy,bxy->xy", x, g, x)
    kappa = float(np.mean(norm_sq))
    if kappa <= 0:
        raise GeometryError("boundary field has zero mean square")
    w_hat = w / np.sqrt(kappa)
    norm_sq = norm_sq / kappa
    rhs = TorusScalar.from_values(1.0 - norm_sq)
    rhs = rhs - rhs.mean()
    return solve_cohomological(rhs, w_hat), w_hat, norm_sq


def nondeg_type_I(
    metric: Union[Embedding, TorusMat], omega, X: Optional[TorusVec] = None
) -> tuple[np.ndarray, float]:
    """
    Averaged matrix M = [G⁻¹(I − ∂R ωᵀ)] of the type-I nondegeneracy condition.

    Computed in the chart where X is linear; X defaults to the constant field ω.

    Returns:
        (M, det M)
    """
    g = metric.g_values if isinstance(metric, Embedding) else metric.values()
    g_inv, _ = inverse_2x2(g)
    R, w_hat, _ = type_I_potential(metric, omega, X)
    dR = R.gradient().values()  # (2, N1, N2)
    inner = np.eye(2)[:, :, None, None] - np.einsum("axy,b->abxy", dR, w_hat)
    M = np.einsum("acxy,cbxy->abxy", g_inv, inner).mean(axis=(-2, -1))
    det = float(np.linalg.det(M))
    logger.debug(f"[Geometry] type-I matrix det={det:.6e}")
    return M, det


def surface_divergence(K: Embedding, current: np.ndarray) -> TorusScalar:
    """
    Surface divergence |n|⁻¹∂_a(|n| j^a) of a tangent field J, with j = G⁻¹DKᵀJ.

    Args:
        current: Grid values of J, shape (3, N₁, N₂)
    """
    norm_n = np.sqrt(K.n_sq_values)
    flux = from_values(norm_n * K.tangential(current))
    div = flux.component(0).derivative(0) + flux.component(1).derivative(1)
    return TorusScalar.from_values(div.values() / norm_n)


def normal_transport_defect(K: Embedding, omega, field: "AmbientField") -> TorusVec:
    """
    L_ω n + DBᵀn − (∂₁E × ∂₂K + ∂₁K × ∂₂E), which vanishes for divergence-free B.
    """
    w = _omega(omega)
    E = invariance_error(K, w, field)
    dE = E.gradient().values()
    dk = K.dk_values
    jb = K.jacobian_values(field)
    l_n = K.n.l_omega(w).values()
    transport = np.einsum("jixy,jxy->ixy", jb, K.n_values)
    correction = cross(dE[:, 0], dk[:, 1]) + cross(dk[:, 0], dE[:, 1])
    return TorusVec.from_values(l_n + transport - correction)


def nested_distance(inner: Embedding, outer: Embedding) -> float:
    """Smallest distance between grid points of two tori."""
    tree = cKDTree(outer.points().reshape(-1, 3))
    distances, _ = tree.query(inner.points().reshape(-1, 3))
    return float(np.min(distances))


def normal_offsets(K: Embedding, points: np.ndarray, iterations: int = 8) -> np.ndarray:
    """
    Signed offsets of points from K along its outward unit normal.

    Each point is projected onto K by Gauss-Newton in the angles, starting
    from the nearest grid node. Positive offsets lie outside K.

    Args:
        points: Array of shape (..., 3)

    Returns:
        Offsets of shape (P,) for the P flattened points
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    _, index = cKDTree(K.points().reshape(-1, 3)).query(pts)
    i, j = np.unravel_index(index, K.grid)
    n1, n2 = K.grid
    angles = np.stack([2 * np.pi * i / n1, 2 * np.pi * j / n2], axis=-1)
    for _ in range(iterations):
        tangent = K.tangent_at(angles)
        diff = pts - K.point_at(angles)
        g = np.einsum("pia,pib->pab", tangent, tangent)
        rhs = np.einsum("pia,pi->pa", tangent, diff)
        angles = angles + np.linalg.solve(g, rhs[..., None])[..., 0]
    tangent = K.tangent_at(angles)
    normal = np.cross(tangent[:, :, 0], tangent[:, :, 1])
    normal *= K.orientation / np.linalg.norm(normal, axis=-1, keepdims=True)
    return np.einsum("pi,pi->p", pts - K.point_at(angles), normal)


def normal_separation(K: Embedding, other: Embedding) -> float:
    """
    Smallest normal gap between two tori, negative when they cross.

    The grid of `other` is measured against K; offsets are taken on the side
    where most of them lie.
    """
    offsets = normal_offsets(K, other.points())
    side = 1.0 if np.median(offsets) >= 0 else -1.0
    return float(np.min(side * offsets))


def mean_minor_radius(K: Embedding, axis_radius: float) -> float:
    """Average distance of the torus from the circle of radius R in the z = 0 plane."""
    x, y, z = K.k_values
    return float(np.mean(np.hypot(np.hypot(x, y) - axis_radius, z)))
