"""Diophantine frequency certificates and constant-coefficient cohomological equations."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SolverConfig
from .exceptions import DegenerateWeight, DivisorUnderflow, NonzeroMean, NotDiophantineUpToCutoff
from .spectral import TorusArray, wavenumbers, wrap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Frequency2:
    """
    Frequency vector with a Diophantine certificate up to a cutoff.

    Attributes:
        omega: The frequency vector (read-only numpy array)
        gamma: Diophantine constant γ
        tau: Diophantine exponent τ
        k_max: Cutoff |k|₁ <= k_max of the certificate
        min_divisor: Smallest |k·ω| over the checked k
        min_weighted: Smallest |k·ω|·|k|^τ over the checked k (>= γ)
    """

    omega: np.ndarray
    gamma: float
    tau: float
    k_max: int
    min_divisor: float
    min_weighted: float

    @property
    def ratio(self) -> float:
        return float(self.omega[1] / self.omega[0])

    @property
    def perp(self) -> np.ndarray:
        """ω^⊥ = (ω₂, −ω₁)."""
        return np.array([self.omega[1], -self.omega[0]])

    @property
    def norm(self) -> float:
        return float(np.hypot(*self.omega))

    def scaled(self, factor: float) -> "Frequency2":
        """Certificate of factor·ω, derived without rescanning."""
        if factor == 0:
            raise NotDiophantineUpToCutoff(None, "zero frequency scale")
        s = abs(float(factor))
        omega = np.array(self.omega) * float(factor)
        omega.setflags(write=False)
        return Frequency2(
            omega=omega,
            gamma=self.gamma * s,
            tau=self.tau,
            k_max=self.k_max,
            min_divisor=self.min_divisor * s,
            min_weighted=self.min_weighted * s,
        )

    def __repr__(self) -> str:
        return (
            f"Frequency2(omega=({self.omega[0]:.12g}, {self.omega[1]:.12g}), "
            f"gamma={self.gamma:.3g}, tau={self.tau:.3g}, k_max={self.k_max})"
        )


def _half_plane_modes(k_max: int) -> np.ndarray:
    """Integer vectors with k₁ > 0 or (k₁ = 0, k₂ > 0), sorted by |k|₁."""
    rng = np.arange(-k_max, k_max + 1)
    k1, k2 = np.meshgrid(rng, rng, indexing="ij")
    k1, k2 = k1.ravel(), k2.ravel()
    norm = np.abs(k1) + np.abs(k2)
    keep = ((k1 > 0) | ((k1 == 0) & (k2 > 0))) & (norm <= k_max)
    modes = np.stack([k1[keep], k2[keep]], axis=1)
    order = np.argsort(np.abs(modes).sum(axis=1), kind="stable")
    return modes[order]


def certify(omega, gamma: float, tau: float, k_max: int) -> Frequency2:
    """
    Certify |k·ω| >= γ|k|^(−τ) for all integer k with 0 < |k|₁ <= k_max.

    Args:
        omega: Frequency 2-vector
        gamma: Diophantine constant (> 0)
        tau: Exponent (> 1)
        k_max: Cutoff of the scan

    Returns:
        Certified frequency

    Raises:
        NotDiophantineUpToCutoff: With the worst violating k
    """
    w = np.asarray(omega, dtype=float).reshape(2)
    if gamma <= 0 or tau <= 1 or k_max < 1:
        raise ValueError("certificate needs gamma > 0, tau > 1 and k_max >= 1")
    if not np.any(w):
        raise NotDiophantineUpToCutoff((1, 0), "zero frequency vector is never Diophantine")

    modes = _half_plane_modes(k_max)
    divisors = np.abs(modes @ w)
    weighted = divisors * np.abs(modes).sum(axis=1).astype(float) ** tau
    worst = int(np.argmin(weighted))
    if weighted[worst] < gamma:
        k = (int(modes[worst, 0]), int(modes[worst, 1]))
        logger.debug(f"certificate failed at k={k}: weighted divisor {weighted[worst]:.3e}")
        raise NotDiophantineUpToCutoff(k)

    frozen = w.copy()
    frozen.setflags(write=False)
    return Frequency2(
        omega=frozen,
        gamma=float(gamma),
        tau=float(tau),
        k_max=int(k_max),
        min_divisor=float(divisors.min()),
        min_weighted=float(weighted[worst]),
    )


def divisors(grid: tuple[int, int], omega) -> np.ndarray:
    """Array of k·ω over the retained modes of a grid."""
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    k1, k2 = wavenumbers(grid)
    return k1 * w[0] + k2 * w[1]


def min_grid_divisor(grid: tuple[int, int], omega) -> float:
    """Smallest nonzero-mode |k·ω| on the grid."""
    d = np.abs(divisors(grid, omega))
    n1, n2 = grid
    k1, k2 = wavenumbers(grid)
    active = (2 * np.abs(k1) < n1) & (2 * np.abs(k2) < n2) & ((k1 != 0) | (k2 != 0))
    return float(d[active].min())


def solve_cohomological(
    f: TorusArray, omega, floor: Optional[float] = None, mean_tol: Optional[float] = None
) -> TorusArray:
    """
    Solve L_ω u = f with zero-mean u.

    Args:
        f: Right-hand side (any component shape); each component must have zero mean
        omega: Frequency2 or plain 2-vector
        floor: Divisor floor (default from config)
        mean_tol: Mean tolerance relative to max(1, ‖f‖∞) (default from config)

    Returns:
        u with u_k = f_k / (i k·ω) and u_0 = 0

    Raises:
        NonzeroMean: If some component of f has a mean above tolerance
        DivisorUnderflow: If a retained mode has |k·ω| below the floor
    """
    settings = SolverConfig.smalldiv()
    floor = settings.divisor_floor if floor is None else floor
    mean_tol = settings.mean_tol if mean_tol is None else mean_tol

    means = np.atleast_1d(f.mean())
    scale = max(1.0, f.sup_norm())
    worst_mean = float(np.max(np.abs(means))) if means.size else 0.0
    if worst_mean >= mean_tol * scale:
        raise NonzeroMean(worst_mean)

    d = divisors(f.grid, omega)
    n1, n2 = f.grid
    k1, k2 = wavenumbers(f.grid)
    active = (2 * np.abs(k1) < n1) & (2 * np.abs(k2) < n2) & ((k1 != 0) | (k2 != 0))
    small = active & (np.abs(d) < floor)
    if np.any(small):
        i, j = np.argwhere(small)[0]
        raise DivisorUnderflow((int(k1[i, 0]), int(k2[0, j])), float(abs(d[i, j])), floor)

    safe = np.where(active, 1j * d, 1.0)
    coeffs = np.where(active, f.coeffs / safe, 0.0)
    return wrap(coeffs)


def solve_with_free_mean(f: TorusArray, g: TorusArray, omega, floor: Optional[float] = None):
    """
    Solve L_ω u = f − μg choosing μ = [f]/[g] so the right side has zero mean.

    Only scalar f and g are supported.

    Returns:
        (u, μ)

    Raises:
        DegenerateWeight: If |[g]| is below the configured weight floor
    """
    g_mean = g.mean()
    if abs(g_mean) <= SolverConfig.smalldiv().weight_floor:
        raise DegenerateWeight(g_mean)
    mu = f.mean() / g_mean
    rhs = f - g * mu
    # exact in the zero mode; drop roundoff
    rhs = rhs - rhs.mean()
    return solve_cohomological(rhs, omega, floor=floor), float(mu)
