"""Base ambient field interface."""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np


def curl_from_jacobian(jac: np.ndarray) -> np.ndarray:
    """
    Curl assembled from Jacobians J[i, j] = ∂_j B_i.

    Args:
        jac: Array of shape (..., 3, 3)

    Returns:
        Array of shape (..., 3)
    """
    return np.stack(
        [
            jac[..., 2, 1] - jac[..., 1, 2],
            jac[..., 0, 2] - jac[..., 2, 0],
            jac[..., 1, 0] - jac[..., 0, 1],
        ],
        axis=-1,
    )


class AmbientField(ABC):
    """
    Abstract base class for 3D vector fields.

    Points are arrays of shape (..., 3); values come back with the same
    leading shape. Implementations are immutable and reentrant.
    """

    divergence_free: bool = False
    beltrami_lambda: Optional[float] = None

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """
        Field value at points.

        Args:
            points: Array of shape (..., 3)

        Returns:
            Array of shape (..., 3)
        """
        pass

    @abstractmethod
    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """
        Field Jacobian J[i, j] = ∂_j B_i at points.

        Args:
            points: Array of shape (..., 3)

        Returns:
            Array of shape (..., 3, 3)
        """
        pass

    def divergence(self, points: np.ndarray) -> np.ndarray:
        return np.trace(self.jacobian(points), axis1=-2, axis2=-1)

    def curl(self, points: np.ndarray) -> np.ndarray:
        return curl_from_jacobian(self.jacobian(points))

    def __add__(self, other: "AmbientField") -> "AmbientField":
        return SumField(self, other)


class SumField(AmbientField):
    """Pointwise sum of two ambient fields."""

    def __init__(self, first: AmbientField, second: AmbientField):
        self.first = first
        self.second = second
        self.divergence_free = first.divergence_free and second.divergence_free
        self.beltrami_lambda = None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.first.evaluate(points) + self.second.evaluate(points)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        return self.first.jacobian(points) + self.second.jacobian(points)

    def __repr__(self) -> str:
        return f"SumField({self.first!r}, {self.second!r})"
