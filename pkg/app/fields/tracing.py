"""Field-line integration oracle for rotation numbers on (nearly) invariant tori."""

import logging
from typing import TYPE_CHECKING, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from app.config import SolverConfig
from app.exceptions import GeometryError, LeftNeighborhood

from .base import AmbientField

if TYPE_CHECKING:
    from app.torus_geom import Embedding

logger = logging.getLogger(__name__)

_PROJECT_TOL = 1e-13
_PROJECT_MAX_ITER = 20


class RotationEstimate(NamedTuple):
    """
    Winding ratio Δθ₂/Δθ₁ of a traced field line, with an error estimate.

    ratio is extrapolated from the readings at t_max/2 and t_max; raw is
    the reading at t_max.
    """

    ratio: float
    error: float
    turns: float
    raw: float = float("nan")


def richardson_ratio(full: float, partial: float) -> float:
    """Cancel the 1/t term of ratio readings taken at t and t/2."""
    return 2.0 * full - partial


def trace_fieldline(
    field: AmbientField, start: np.ndarray, t_max: float, samples: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Integrate dx/dt = B(x) with DOP853.

    Returns:
        (times, points) with points of shape (samples, 3)
    """
    settings = SolverConfig.tracing()
    times = np.linspace(0.0, t_max, samples)

    def rhs(_t, x):
        return field.evaluate(x)

    solution = solve_ivp(
        rhs,
        (0.0, t_max),
        np.asarray(start, dtype=float),
        method="DOP853",
        t_eval=times,
        rtol=settings.rtol,
        atol=settings.atol,
    )
    if not solution.success:
        raise GeometryError(f"field-line integration failed: {solution.message}")
    return solution.t, solution.y.T


def project_to_angles(embedding: "Embedding", point: np.ndarray, guess: np.ndarray):
    """
    Gauss–Newton projection of an ambient point onto torus angles.

    The returned angles are the lift closest to the guess.

    Returns:
        (theta, distance)
    """
    theta = np.array(guess, dtype=float)
    for _ in range(_PROJECT_MAX_ITER):
        residual = point - embedding.point_at(theta[None, :])[0]
        tangent = embedding.tangent_at(theta[None, :])[0]  # (3, 2)
        step = np.linalg.lstsq(tangent, residual, rcond=None)[0]
        theta = theta + step
        if np.max(np.abs(step)) < _PROJECT_TOL:
            break
    distance = float(np.linalg.norm(point - embedding.point_at(theta[None, :])[0]))
    return theta, distance


def fieldline_rotation_number(
    field: AmbientField,
    embedding: "Embedding",
    t_max: float,
    start: Optional[np.ndarray] = None,
    drift_tol: Optional[float] = None,
) -> RotationEstimate:
    """
    Rotation ratio of the field line through K(0, 0), measured in torus angles.

    The line is traced and every sample is projected back to torus angles.
    The ratio Δθ₂/Δθ₁ is read at t_max/2 and t_max. Both readings differ
    from the rotation number by a 1/t term, which the returned ratio
    extrapolates away; the difference of the readings is the error estimate.

    Args:
        field: Ambient field
        embedding: Torus invariant (or nearly so) under the field
        t_max: Integration time
        start: Initial angles (default (0, 0))
        drift_tol: Largest allowed distance from the torus

    Raises:
        LeftNeighborhood: If the line leaves the torus by more than drift_tol
    """
    settings = SolverConfig.tracing()
    drift_tol = settings.drift_tol if drift_tol is None else drift_tol
    theta0 = np.zeros(2) if start is None else np.asarray(start, dtype=float)

    x0 = embedding.point_at(theta0[None, :])[0]
    speed = float(np.linalg.norm(field.evaluate(x0)))
    scale = max(float(np.max(np.linalg.norm(embedding.K.values(), axis=0))), 1.0)
    turns_estimate = max(speed * t_max / (2 * np.pi * scale), 1.0)
    samples = int(np.ceil(turns_estimate * settings.samples_per_turn)) + 1
    if samples % 2 == 0:
        samples += 1  # odd, so t_max/2 is a sample

    times, points = trace_fieldline(field, x0, t_max, samples)

    angles = np.empty((samples, 2))
    angles[0] = theta0
    worst = 0.0
    for i in range(1, samples):
        if i >= 2:
            guess = 2 * angles[i - 1] - angles[i - 2]
        else:
            guess = angles[0]
        angles[i], distance = project_to_angles(embedding, points[i], guess)
        worst = max(worst, distance)
        if distance > drift_tol:
            logger.warning(f"[Tracing] left torus at t={times[i]:.3f} (distance {distance:.3e})")
            raise LeftNeighborhood(distance, drift_tol)

    half = samples // 2
    moved = angles[-1] - angles[0]
    moved_half = angles[half] - angles[0]
    if abs(moved[0]) < 1e-12 or abs(moved_half[0]) < 1e-12:
        raise GeometryError("field line does not advance in the first angle")
    full = moved[1] / moved[0]
    partial = moved_half[1] / moved_half[0]
    ratio = richardson_ratio(full, partial)
    error = abs(full - partial)
    logger.debug(
        f"[Tracing] ratio={ratio:.12f} error={error:.2e} max distance={worst:.2e} "
        f"({samples} samples)"
    )
    return RotationEstimate(
        ratio=float(ratio), error=float(error), turns=moved[0] / (2 * np.pi), raw=float(full)
    )
