"""Test helpers - builders for tori, fields and run files."""

import textwrap
from pathlib import Path

import numpy as np

from app.fields import FrequencyProfile, NestedFamily, SyntheticNestedField
from app.hj import sheared_flat_metric
from app.spectral import TorusScalar, TorusVec, grid_points
from app.torus_geom import Embedding

GOLDEN = float((np.sqrt(5.0) - 1.0) / 2.0)

# ω₂(s) = 0.5 + 0.4 s crosses the golden ratio here
GOLDEN_RADIUS = (GOLDEN - 0.5) / 0.4


def unit_golden() -> np.ndarray:
    """(1, golden) scaled to unit length."""
    w = np.array([1.0, GOLDEN])
    return w / np.linalg.norm(w)


def nested_field(
    omega2: tuple = (0.5, 0.4), major_radius: float = 3.0
) -> tuple[SyntheticNestedField, NestedFamily]:
    """Synthetic nested tori with ω₁ = 1 and the given ω₂ profile."""
    field = SyntheticNestedField(major_radius, FrequencyProfile((1.0,), omega2), (0.05, 0.6))
    return field, NestedFamily(field)


def standard_torus(major_radius: float, minor_radius: float, grid: tuple[int, int]) -> Embedding:
    """Torus of revolution in the toroidal/poloidal angles."""
    phi1, phi2 = grid_points(grid)
    rho = major_radius + minor_radius * np.cos(phi2)
    values = np.stack([rho * np.cos(phi1), rho * np.sin(phi1), minor_radius * np.sin(phi2)])
    return Embedding(TorusVec.from_values(values))


def closed_datum(
    major_radius: float, minor_radius: float, q: float, grid: tuple[int, int]
) -> TorusVec:
    """Field with constant covector (1, q) on the standard torus: (1/ρ², q/r²)."""
    _, phi2 = grid_points(grid)
    rho = major_radius + minor_radius * np.cos(phi2)
    return TorusVec.from_values(np.stack([1.0 / rho**2, np.full(grid, q / minor_radius**2)]))


def trig_scalar(grid: tuple[int, int]) -> TorusScalar:
    """Zero-mean trigonometric polynomial well inside the band."""
    return TorusScalar.from_function(
        lambda p1, p2: np.cos(p1 + 2 * p2) + 0.5 * np.sin(3 * p1 - p2) - 0.25 * np.cos(2 * p2),
        grid,
    )


def sheared_metric(amplitude: float = 0.01, grid: tuple[int, int] = (16, 16)):
    """Unit golden frequency with its sheared flat metric."""
    omega = unit_golden()
    return sheared_flat_metric(omega, amplitude, grid), omega


def write_config(path: Path, text: str) -> Path:
    """Write a run configuration file from indented text."""
    path = Path(path)
    path.write_text(textwrap.dedent(text).lstrip())
    return path
