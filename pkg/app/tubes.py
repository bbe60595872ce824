"""
Thin tubes around closed space curves.

A curve γ is reparametrized by normalized arc length α ∈ [0, 2π), and its
tube of radius ε is

    K(α, θ) = γ(α) + ε(cos(θ − Θ(α)) N(α) + sin(θ − Θ(α)) B(α))

where (T, N, B) is the Frenet frame and Θ is the periodic part of the
accumulated torsion, Θ(α) = ∫₀^α τ − [τ]α. In these angles the leading
frequency of a thin tube is (1, −[τ]).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import GeometryError, SelfIntersection
from .spectral import TorusVec, derivative_1d, periodic_antiderivative
from .torus_geom import Embedding

logger = logging.getLogger(__name__)

_CURVATURE_FLOOR = 1e-8
_ARC_TOL = 1e-14
_ARC_MAX_ITER = 50


def _fourier_interp(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate trigonometric interpolants of samples (..., n) at points (P,)."""
    n = values.shape[-1]
    coeffs = np.fft.fft(values, axis=-1) / n
    k = np.fft.fftfreq(n, 1.0 / n).round()
    coeffs = np.where(2 * np.abs(k) < n, coeffs, 0.0)
    phases = np.exp(1j * np.outer(k, points))
    return np.real(coeffs @ phases)


@dataclass(frozen=True)
class ClosedCurve:
    """
    Closed curve sampled uniformly in normalized arc length.

    Attributes:
        points: γ(α_j), shape (3, n)
        length: Total length
    """

    points: np.ndarray
    length: float

    @classmethod
    def from_function(
        cls, gamma: Callable[[np.ndarray], np.ndarray], samples: int = 128
    ) -> "ClosedCurve":
        """
        Sample a 2π-periodic curve and reparametrize it by arc length.

        Args:
            gamma: Map from parameters (n,) to points (3, n)
            samples: Number of samples (even)

        Raises:
            GeometryError: If the curve is not regular
        """
        if samples < 8 or samples % 2:
            raise ValueError(f"curve needs an even number of samples >= 8, got {samples}")
        u = 2 * np.pi * np.arange(samples) / samples
        raw = np.asarray(gamma(u), dtype=float)
        speed = np.linalg.norm(derivative_1d(raw), axis=0)
        if np.min(speed) <= 0:
            raise GeometryError("curve is not regular: speed vanishes")
        wiggle, mean_speed = periodic_antiderivative(speed)

        # solve u + wiggle(u)/mean_speed = α for u at uniform α
        alpha = u.copy()
        guess = alpha.copy()
        for _ in range(_ARC_MAX_ITER):
            excess = guess + _fourier_interp(wiggle, guess) / mean_speed - alpha
            slope = _fourier_interp(speed, guess) / mean_speed
            step = excess / slope
            guess = guess - step
            if np.max(np.abs(step)) < _ARC_TOL:
                break
        points = np.asarray(gamma(guess), dtype=float)
        curve = cls(points=points, length=2 * np.pi * mean_speed)
        curve.curvature  # rejects curves without a Frenet frame
        logger.debug(f"[Tubes] curve of length {curve.length:.6f} with {samples} samples")
        return curve

    @property
    def samples(self) -> int:
        return self.points.shape[-1]

    @property
    def speed(self) -> np.ndarray:
        """|dγ/dα|, constant for an arc-length curve."""
        return np.linalg.norm(derivative_1d(self.points), axis=0)

    @cached_property
    def _frenet(self) -> dict:
        d1 = derivative_1d(self.points, 1)
        d2 = derivative_1d(self.points, 2)
        d3 = derivative_1d(self.points, 3)
        binormal = np.cross(d1, d2, axis=0)
        b_norm = np.linalg.norm(binormal, axis=0)
        d1_norm = np.linalg.norm(d1, axis=0)
        kappa = b_norm / d1_norm**3
        if np.min(kappa) <= _CURVATURE_FLOOR:
            raise GeometryError("curvature vanishes: Frenet frame undefined")
        tangent = d1 / d1_norm
        binormal = binormal / b_norm
        return dict(
            tangent=tangent,
            normal=np.cross(binormal, tangent, axis=0),
            binormal=binormal,
            curvature=kappa,
            torsion=np.einsum("ij,ij->j", np.cross(d1, d2, axis=0), d3) / b_norm**2,
        )

    @property
    def tangent(self) -> np.ndarray:
        return self._frenet["tangent"]

    @property
    def normal(self) -> np.ndarray:
        return self._frenet["normal"]

    @property
    def binormal(self) -> np.ndarray:
        return self._frenet["binormal"]

    @property
    def curvature(self) -> np.ndarray:
        """κ per unit length."""
        return self._frenet["curvature"]

    @property
    def torsion(self) -> np.ndarray:
        """τ per unit length."""
        return self._frenet["torsion"]

    @property
    def total_torsion(self) -> float:
        """∫ τ ds over the whole curve."""
        return float(np.mean(self.torsion) * self.length)

    @property
    def mean_torsion(self) -> float:
        """[τ] per unit angle α."""
        return self.total_torsion / (2 * np.pi)

    def torsion_phase(self) -> np.ndarray:
        """Θ(α) = ∫₀^α τ − [τ]α on the samples (periodic)."""
        per_angle = self.torsion * self.length / (2 * np.pi)
        phase, _ = periodic_antiderivative(per_angle)
        return phase


def thin_tube_frequency(curve: ClosedCurve) -> np.ndarray:
    """Leading-order frequency (1, −[τ]) of thin tubes around the curve."""
    return np.array([1.0, -curve.mean_torsion])


def tube_clearance(curve: ClosedCurve, eps: float) -> float:
    """
    Smallest chord between samples more than πε apart along the curve, over 2ε.

    Values above 1 mean the sampled tube does not overlap itself.
    """
    pts = curve.points.T
    n = curve.samples
    tree = cKDTree(pts)
    step = curve.length / n
    worst = np.inf
    for i, j in tree.query_pairs(2 * eps):
        gap = abs(i - j)
        arc = min(gap, n - gap) * step
        if arc > np.pi * eps:
            worst = min(worst, float(np.linalg.norm(pts[i] - pts[j])))
    return worst / (2 * eps)


def tube_embedding(curve: ClosedCurve, eps: float, n_theta: int = 32) -> Embedding:
    """
    Boundary torus of the tube of radius ε around a curve.

    Args:
        curve: Arc-length sampled curve; its sample count is the first grid size
        eps: Tube radius
        n_theta: Second grid size

    Raises:
        SelfIntersection: If ε·max κ ≥ 1 or the sampled clearance fails
    """
    if eps <= 0:
        raise GeometryError(f"tube radius must be positive, got {eps}")
    kappa_max = float(np.max(curve.curvature))
    if eps * kappa_max >= 1.0:
        raise SelfIntersection(f"eps={eps:.3e} reaches the curvature radius {1 / kappa_max:.3e}")
    clearance = tube_clearance(curve, eps)
    if clearance <= 1.0:
        raise SelfIntersection(f"tube clearance ratio {clearance:.3f} <= 1")

    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    angle = theta[None, :] - curve.torsion_phase()[:, None]  # (n_alpha, n_theta)
    offset = curve.normal[:, :, None] * np.cos(angle) + curve.binormal[:, :, None] * np.sin(angle)
    values = curve.points[:, :, None] + eps * offset
    logger.info(
        f"[Tubes] tube eps={eps:.3e}: mean torsion {curve.mean_torsion:.6e}, "
        f"eps*max curvature {eps * kappa_max:.3f}"
    )
    return Embedding(TorusVec.from_values(values))
