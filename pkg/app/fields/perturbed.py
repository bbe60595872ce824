"""Divergence-free perturbations built as curls of trigonometric vector potentials."""

import logging

import numpy as np

from .base import AmbientField, SumField

logger = logging.getLogger(__name__)

_MAX_WAVE_INDEX = 2


class CurlPotentialField(AmbientField):
    """
    curl A for A(x) = Σ_m a_m sin(k_m·x + θ_m), periodic in a cube of side L.

    Each term contributes (k_m × a_m) cos(k_m·x + θ_m), so the field is
    divergence-free term by term.
    """

    divergence_free = True
    beltrami_lambda = None

    def __init__(self, wave_vectors: np.ndarray, amplitudes: np.ndarray, phases: np.ndarray):
        self.wave_vectors = np.asarray(wave_vectors, dtype=float)
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        self.phases = np.asarray(phases, dtype=float)
        self._curl_amplitudes = np.cross(self.wave_vectors, self.amplitudes)

    @classmethod
    def random(cls, seed: int, modes: int = 6, length: float = 12.0) -> "CurlPotentialField":
        """
        Draw a potential with integer wave indices in {−2, ..., 2}³.

        The curl amplitudes are normalized so Σ_m |k_m × a_m| = 1, which
        bounds the field by 1 everywhere.
        """
        if modes < 1:
            raise ValueError("perturbation needs at least one mode")
        rng = np.random.default_rng(seed)
        indices = rng.integers(-_MAX_WAVE_INDEX, _MAX_WAVE_INDEX + 1, size=(modes, 3))
        zero = ~np.any(indices, axis=1)
        indices[zero] = (1, 0, 0)
        wave_vectors = 2 * np.pi * indices / length
        amplitudes = rng.standard_normal((modes, 3))
        phases = rng.uniform(0.0, 2 * np.pi, size=modes)
        total = np.sum(np.linalg.norm(np.cross(wave_vectors, amplitudes), axis=1))
        if total == 0.0:
            raise ValueError("degenerate perturbation potential")
        return cls(wave_vectors, amplitudes / total, phases)

    def _arguments(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.wave_vectors.T + self.phases

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.cos(self._arguments(points)) @ self._curl_amplitudes

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        weights = -np.sin(self._arguments(points))
        return np.einsum("...m,mi,mj->...ij", weights, self._curl_amplitudes, self.wave_vectors)

    def __repr__(self) -> str:
        return f"CurlPotentialField(modes={len(self.phases)})"


def perturb_div_free(
    field: AmbientField, delta: float, seed: int = 0, modes: int = 6, length: float = 12.0
) -> AmbientField:
    """
    Add δ·curl(A) to a field, with A a fixed random trigonometric potential.

    Args:
        field: Field to perturb
        delta: Perturbation amplitude (>= 0)
        seed: Seed of the potential
        modes: Number of potential terms
        length: Period of the potential box

    Returns:
        The input field itself when δ = 0, else the perturbed field
    """
    if delta < 0:
        raise ValueError(f"perturbation amplitude must be >= 0, got {delta}")
    if delta == 0:
        return field
    potential = CurlPotentialField.random(seed, modes=modes, length=length)
    logger.info(f"[Fields] perturbing with delta={delta:.3e} (seed={seed}, modes={modes})")
    return SumField(field, _Scaled(potential, delta))


class _Scaled(AmbientField):
    def __init__(self, field: AmbientField, factor: float):
        self.field = field
        self.factor = float(factor)
        self.divergence_free = field.divergence_free

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.field.evaluate(points)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.field.jacobian(points)

    def __repr__(self) -> str:
        return f"{self.factor:g}*{self.field!r}"
