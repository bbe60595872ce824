"""Integrable test fields with exactly known nested invariant tori.

Tori are circular tubes of minor radius s around a ring of radius R. The
poloidal angle is replaced by ψ = φ₂ + (s/R) sin φ₂, which makes the volume
element of (s, φ₁, ψ) equal to sR. The field ω₁(s)∂_{φ₁} + ω₂(s)∂_ψ is then
divergence-free, and in Cartesian form reads

    B = ω₁(s)(−y, x, 0) + ω₂(s)(R/r)(−xz/r, −yz/r, r − R)

with r the cylindrical radius.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from app.exceptions import GeometryError

from .base import AmbientField

if TYPE_CHECKING:
    from app.torus_geom import Embedding

logger = logging.getLogger(__name__)

_KEPLER_TOL = 1e-15
_KEPLER_MAX_ITER = 50


@dataclass(frozen=True)
class FrequencyProfile:
    """
    Polynomial frequency profile ω(s) = (ω₁(s), ω₂(s)).

    Attributes:
        omega1: Coefficients of ω₁ in increasing degree
        omega2: Coefficients of ω₂ in increasing degree
    """

    omega1: tuple[float, ...] = (1.0,)
    omega2: tuple[float, ...] = (0.3,)

    @property
    def polynomials(self) -> tuple[Polynomial, Polynomial]:
        return Polynomial(self.omega1), Polynomial(self.omega2)

    def __call__(self, s) -> np.ndarray:
        """ω(s) with a leading axis of length 2."""
        p1, p2 = self.polynomials
        return np.stack([p1(s), p2(s)])

    def derivative(self, s) -> np.ndarray:
        p1, p2 = self.polynomials
        return np.stack([p1.deriv()(s), p2.deriv()(s)])

    def ratio(self, s) -> np.ndarray:
        """Rotation ratio ω₂(s)/ω₁(s)."""
        w = self(s)
        return w[1] / w[0]

    @property
    def sheared(self) -> bool:
        """False when the rotation ratio is independent of s."""
        p1, p2 = self.polynomials
        cross = p1 * p2.deriv() - p2 * p1.deriv()
        return bool(np.any(np.abs(cross.coef) > 0))


def kepler_angle(theta: np.ndarray, e: float) -> np.ndarray:
    """
    Solve θ = φ + e sin φ for φ by Newton iteration.

    Args:
        theta: Target angles (any shape)
        e: Eccentricity-like parameter with |e| < 1
    """
    if abs(e) >= 1:
        raise GeometryError(f"angle reparametrization needs |s/R| < 1, got {e}")
    theta = np.asarray(theta, dtype=float)
    phi = theta.copy()
    for _ in range(_KEPLER_MAX_ITER):
        step = (phi + e * np.sin(phi) - theta) / (1 + e * np.cos(phi))
        phi = phi - step
        if np.max(np.abs(step), initial=0.0) < _KEPLER_TOL:
            break
    return phi


class SyntheticNestedField(AmbientField):
    """
    Divergence-free field whose invariant tori are circular tubes.

    Every torus of minor radius s in the configured range carries linear
    dynamics with frequency ω(s) in the angles (φ₁, ψ).
    """

    divergence_free = True
    beltrami_lambda = None

    def __init__(self, major_radius: float, profile: FrequencyProfile, s_range: Sequence[float]):
        s0, s1 = float(s_range[0]), float(s_range[1])
        if major_radius <= 0 or s0 <= 0 or s1 <= s0:
            raise GeometryError(f"bad tube family: R={major_radius}, s in [{s0}, {s1}]")
        if s1 >= major_radius:
            raise GeometryError(f"tubes self-intersect: s_max={s1} >= R={major_radius}")
        self.major_radius = float(major_radius)
        self.profile = profile
        self.s_range = (s0, s1)

    def _coordinates(self, points: np.ndarray):
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        r = np.hypot(x, y)
        u = r - self.major_radius
        s = np.hypot(u, z)
        return x, y, z, r, u, s

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        x, y, z, r, u, s = self._coordinates(points)
        w1, w2 = self.profile(s)
        big_r = self.major_radius
        toroidal = np.stack([-y, x, np.zeros_like(x)], axis=-1)
        poloidal = (big_r / r)[..., None] * np.stack([-x * z / r, -y * z / r, u], axis=-1)
        return w1[..., None] * toroidal + w2[..., None] * poloidal

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        x, y, z, r, u, s = self._coordinates(points)
        big_r = self.major_radius
        w1, w2 = self.profile(s)
        dw1, dw2 = self.profile.derivative(s)

        zeros = np.zeros_like(x)
        toroidal = np.stack([-y, x, zeros], axis=-1)
        poloidal = (big_r / r)[..., None] * np.stack([-x * z / r, -y * z / r, u], axis=-1)
        grad_s = np.stack([u * x / (r * s), u * y / (r * s), z / s], axis=-1)

        d_toroidal = np.zeros((*x.shape, 3, 3))
        d_toroidal[..., 0, 1] = -1.0
        d_toroidal[..., 1, 0] = 1.0

        r2, r3, r4 = r**2, r**3, r**4
        d_poloidal = np.empty((*x.shape, 3, 3))
        d_poloidal[..., 0, 0] = -z / r2 + 2 * x * x * z / r4
        d_poloidal[..., 0, 1] = 2 * x * y * z / r4
        d_poloidal[..., 0, 2] = -x / r2
        d_poloidal[..., 1, 0] = 2 * x * y * z / r4
        d_poloidal[..., 1, 1] = -z / r2 + 2 * y * y * z / r4
        d_poloidal[..., 1, 2] = -y / r2
        d_poloidal[..., 2, 0] = big_r * x / r3
        d_poloidal[..., 2, 1] = big_r * y / r3
        d_poloidal[..., 2, 2] = 0.0
        d_poloidal *= big_r

        return (
            w1[..., None, None] * d_toroidal
            + toroidal[..., :, None] * (dw1[..., None] * grad_s)[..., None, :]
            + w2[..., None, None] * d_poloidal
            + poloidal[..., :, None] * (dw2[..., None] * grad_s)[..., None, :]
        )

    def __repr__(self) -> str:
        return (
            f"SyntheticNestedField(R={self.major_radius}, profile={self.profile}, "
            f"s_range={self.s_range})"
        )


class NestedFamily:
    """
    The invariant tori of a :class:`SyntheticNestedField` with their frequencies.

    Tori are parametrized in the angles (φ₁, ψ) where the dynamics is linear.
    """

    def __init__(self, field: SyntheticNestedField):
        self.field = field

    @property
    def major_radius(self) -> float:
        return self.field.major_radius

    @property
    def s_range(self) -> tuple[float, float]:
        return self.field.s_range

    def _check(self, s: float) -> None:
        s0, s1 = self.s_range
        if not s0 <= s <= s1:
            raise GeometryError(f"minor radius {s} outside family range [{s0}, {s1}]")

    def frequency(self, s: float) -> np.ndarray:
        self._check(s)
        return self.field.profile(s)

    def rotation(self, s: float) -> float:
        return float(self.field.profile.ratio(s))

    def twist(self, s: float) -> float:
        """Closed-form twist constant (ω₁ω₂' − ω₂ω₁')/(Rs) of the torus of radius s."""
        w = self.field.profile(s)
        dw = self.field.profile.derivative(s)
        return float((w[0] * dw[1] - w[1] * dw[0]) / (self.major_radius * s))

    def point(self, s: float, phi1: np.ndarray, psi: np.ndarray) -> np.ndarray:
        """K_s(φ₁, ψ) with a trailing axis of length 3."""
        big_r = self.major_radius
        phi2 = kepler_angle(psi, s / big_r)
        r = big_r + s * np.cos(phi2)
        return np.stack([r * np.cos(phi1), r * np.sin(phi1), s * np.sin(phi2)], axis=-1)

    def embedding(self, s: float, grid: tuple[int, int]) -> "Embedding":
        """Invariant torus of minor radius s sampled on a grid."""
        from app.spectral import TorusVec, grid_points
        from app.torus_geom import Embedding

        self._check(s)
        phi1, psi = grid_points(grid)
        values = np.moveaxis(self.point(s, phi1, psi), -1, 0)
        logger.debug(f"[Synthetic] torus s={s} on grid {grid[0]}x{grid[1]}")
        return Embedding(TorusVec.from_values(values))

    def coordinates(self, points: np.ndarray) -> np.ndarray:
        """(s, φ₁, ψ) of ambient points, trailing axis of length 3."""
        points = np.asarray(points, dtype=float)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        r = np.hypot(x, y)
        u = r - self.major_radius
        s = np.hypot(u, z)
        phi2 = np.arctan2(z, u)
        psi = phi2 + (s / self.major_radius) * np.sin(phi2)
        return np.stack([s, np.arctan2(y, x), psi], axis=-1)
