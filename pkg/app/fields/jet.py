"""Ambient-field adapter for normal-direction jets."""

import logging

import numpy as np
from scipy.spatial import cKDTree

from app.config import SolverConfig
from app.exceptions import GeometryError

from .base import AmbientField

logger = logging.getLogger(__name__)

# points this close to the validity edge count as on it
_EDGE_SLACK = 1e-10


class JetAmbientField(AmbientField):
    """
    A :class:`~app.ck_extend.JetField` seen as a field on R³.

    Points are located in the chart x = K(φ) + tν(φ) by Newton's method,
    seeded with the nearest grid node of the base torus.
    """

    divergence_free = True

    def __init__(self, jet):
        self.jet = jet
        self.beltrami_lambda = jet.lam
        self._tree = cKDTree(jet.base.points().reshape(-1, 3))
        n1, n2 = jet.grid
        phi1 = 2 * np.pi * np.arange(n1) / n1
        phi2 = 2 * np.pi * np.arange(n2) / n2
        self._nodes = np.stack(np.meshgrid(phi1, phi2, indexing="ij"), axis=-1).reshape(-1, 2)
        self._normal_grad = jet.unit_normal.gradient()
        self._tangent = jet.base.DK
        self._last = (None, None, None)

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Chart coordinates of ambient points.

        Args:
            points: Array of shape (P, 3)

        Returns:
            (angles (P, 2), t (P,))

        Raises:
            GeometryError: If Newton's method does not converge
        """
        settings = SolverConfig.jet()
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        _, nearest = self._tree.query(points)
        angles = self._nodes[nearest].copy()
        base_points = self.jet.base.point_at(angles)
        nu = self.jet.unit_normal.evaluate_at(angles)
        t = np.einsum("pi,pi->p", points - base_points, nu)

        for _ in range(settings.locate_max_iter):
            base_points = self.jet.base.point_at(angles)
            nu = self.jet.unit_normal.evaluate_at(angles)
            residual = base_points + t[:, None] * nu - points
            chart = np.concatenate(
                [
                    self._tangent.evaluate_at(angles)
                    + t[:, None, None] * self._normal_grad.evaluate_at(angles),
                    nu[:, :, None],
                ],
                axis=2,
            )
            step = np.linalg.solve(chart, -residual[:, :, None])[:, :, 0]
            angles = angles + step[:, :2]
            t = t + step[:, 2]
            if np.max(np.abs(step)) < settings.locate_tol:
                return np.mod(angles, 2 * np.pi), t
        worst = float(np.max(np.abs(step)))
        raise GeometryError(f"cannot locate points in the jet chart (last step {worst:.3e})")

    def _evaluate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        from app.ck_extend import eval_jet

        points = np.asarray(points, dtype=float)
        key = (points.shape, points.tobytes())
        cached_key, cached_values, cached_jac = self._last
        if cached_key == key:
            return cached_values, cached_jac
        lead = points.shape[:-1]
        angles, t = self.locate(points.reshape(-1, 3))
        lo, hi = self.jet.t_range
        t = np.where((t < lo) & (t > lo - _EDGE_SLACK), lo, t)
        t = np.where((t > hi) & (t < hi + _EDGE_SLACK), hi, t)
        values, jac = eval_jet(self.jet, angles, t)
        values, jac = values.reshape(*lead, 3), jac.reshape(*lead, 3, 3)
        # replaced as a whole, never mutated
        self._last = (key, values, jac)
        return values, jac

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self._evaluate(points)[0]

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        return self._evaluate(points)[1]

    def __repr__(self) -> str:
        return f"JetAmbientField({self.jet!r})"
