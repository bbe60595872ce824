"""Band-limited Fourier calculus on the 2-torus.

Functions on T² are stored as normalized FFT coefficients over a uniform grid
φ_j = 2πj/N. Component axes come first and the two grid axes last, so a vector
field on a 32x32 grid has coefficient shape (3, 32, 32). The Nyquist row and
column are kept at zero; every stored function is real.
"""

import logging
from typing import Any, Callable, Optional, Union

import numpy as np

from .config import SolverConfig
from .exceptions import NotDiffeomorphism

logger = logging.getLogger(__name__)

Grid = tuple[int, int]

_EVAL_CHUNK = 4096


def wavenumbers(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Integer wave numbers broadcastable against an (N₁, N₂) coefficient block."""
    n1, n2 = grid
    k1 = np.fft.fftfreq(n1, 1.0 / n1).round().astype(int)
    k2 = np.fft.fftfreq(n2, 1.0 / n2).round().astype(int)
    return k1[:, None], k2[None, :]


def retained_mask(grid: Grid) -> np.ndarray:
    """Boolean mask of the modes kept on a grid (Nyquist modes excluded)."""
    k1, k2 = wavenumbers(grid)
    return (2 * np.abs(k1) < grid[0]) & (2 * np.abs(k2) < grid[1])


def grid_points(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Angles (φ₁, φ₂) of the grid nodes, each of shape (N₁, N₂)."""
    n1, n2 = grid
    phi1 = 2 * np.pi * np.arange(n1) / n1
    phi2 = 2 * np.pi * np.arange(n2) / n2
    return np.meshgrid(phi1, phi2, indexing="ij")


def _omega_vector(omega: Any) -> np.ndarray:
    return np.asarray(getattr(omega, "omega", omega), dtype=float)


class TorusArray:
    """
    Real function on T² with values in a fixed-shape array.

    Instances are immutable by convention: every operation returns a new
    object. Subclasses fix the component rank.
    """

    rank: Optional[int] = None
    __array_ufunc__ = None

    def __init__(self, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim < 2:
            raise ValueError("coefficient array needs two trailing grid axes")
        n1, n2 = coeffs.shape[-2:]
        if n1 <= 0 or n2 <= 0 or n1 % 2 or n2 % 2:
            raise ValueError(f"grid sizes must be positive and even, got {n1}x{n2}")
        if self.rank is not None and coeffs.ndim - 2 != self.rank:
            raise ValueError(
                f"{type(self).__name__} expects {self.rank} component axes, "
                f"got shape {coeffs.shape[:-2]}"
            )
        self._coeffs = coeffs * retained_mask((n1, n2))
        self._coeffs.setflags(write=False)

    # construction

    @classmethod
    def from_values(cls, values: np.ndarray) -> "TorusArray":
        """Analyze real grid values of shape (*components, N₁, N₂)."""
        values = np.asarray(values, dtype=float)
        n1, n2 = values.shape[-2:]
        coeffs = np.fft.fft2(values, axes=(-2, -1)) / (n1 * n2)
        return cls(coeffs)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray, np.ndarray], Any], grid: Grid):
        """Sample func(φ₁, φ₂) on the grid and analyze."""
        phi1, phi2 = grid_points(grid)
        return cls.from_values(np.asarray(func(phi1, phi2), dtype=float))

    @classmethod
    def zeros(cls, grid: Grid, shape: tuple[int, ...] = ()) -> "TorusArray":
        return cls(np.zeros((*shape, *grid), dtype=complex))

    @classmethod
    def constant(cls, value: Any, grid: Grid) -> "TorusArray":
        value = np.asarray(value, dtype=float)
        values = np.broadcast_to(value[..., None, None], (*value.shape, *grid))
        return cls.from_values(values)

    # basic properties

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def grid(self) -> Grid:
        return self._coeffs.shape[-2], self._coeffs.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self._coeffs.shape[:-2]

    def values(self) -> np.ndarray:
        """Synthesize real grid values."""
        n1, n2 = self.grid
        return np.real(np.fft.ifft2(self._coeffs * (n1 * n2), axes=(-2, -1)))

    def mean(self) -> Union[float, np.ndarray]:
        """Average over T² (the zero mode)."""
        m = np.real(self._coeffs[..., 0, 0])
        return float(m) if m.ndim == 0 else np.array(m)

    def sup_norm(self) -> float:
        """Maximum absolute grid value over all components."""
        return float(np.max(np.abs(self.values()))) if self._coeffs.size else 0.0

    def component(self, index: Any) -> "TorusArray":
        return wrap(self._coeffs[index])

    # algebra

    def _same_grid(self, other: "TorusArray") -> None:
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: Any) -> "TorusArray":
        if isinstance(other, TorusArray):
            self._same_grid(other)
            return wrap(self._coeffs + other._coeffs)
        return wrap(self._coeffs + _constant_coeffs(other, self))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "TorusArray":
        if isinstance(other, TorusArray):
            self._same_grid(other)
            return wrap(self._coeffs - other._coeffs)
        return wrap(self._coeffs - _constant_coeffs(other, self))

    def __rsub__(self, other: Any) -> "TorusArray":
        return (-self) + other

    def __neg__(self) -> "TorusArray":
        return wrap(-self._coeffs)

    def __mul__(self, scalar: float) -> "TorusArray":
        if isinstance(scalar, TorusArray):
            raise TypeError("use spectral.product for function products")
        return wrap(self._coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "TorusArray":
        return wrap(self._coeffs / float(scalar))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.shape}, grid={self.grid})"

    # calculus

    def derivative(self, axis: int) -> "TorusArray":
        """Partial derivative ∂_{φ₁} (axis 0) or ∂_{φ₂} (axis 1)."""
        k1, k2 = wavenumbers(self.grid)
        k = k1 if axis == 0 else k2
        return wrap(1j * k * self._coeffs)

    def gradient(self) -> "TorusArray":
        """Stack of both partial derivatives as a new trailing component axis."""
        k1, k2 = wavenumbers(self.grid)
        stacked = np.stack([1j * k1 * self._coeffs, 1j * k2 * self._coeffs], axis=-3)
        return wrap(stacked)

    def l_omega(self, omega: Any) -> "TorusArray":
        """Directional derivative ω·∂ (modewise i k·ω)."""
        w = _omega_vector(omega)
        k1, k2 = wavenumbers(self.grid)
        return wrap(1j * (k1 * w[0] + k2 * w[1]) * self._coeffs)

    def translate(self, shift: np.ndarray) -> "TorusArray":
        """Exact translate f(· + d)."""
        d = np.asarray(shift, dtype=float)
        k1, k2 = wavenumbers(self.grid)
        return wrap(self._coeffs * np.exp(1j * (k1 * d[0] + k2 * d[1])))

    def resize(self, grid: Grid) -> "TorusArray":
        """Spectral interpolation (or truncation) to another grid."""
        return wrap(_resize_coeffs(self._coeffs, grid))

    def tail_ratio(self) -> float:
        """Largest coefficient in the outer half band relative to the largest overall."""
        k1, k2 = wavenumbers(self.grid)
        n1, n2 = self.grid
        outer = (4 * np.abs(k1) > n1) | (4 * np.abs(k2) > n2)
        magnitudes = np.abs(self._coeffs)
        top = magnitudes.max() if magnitudes.size else 0.0
        if top == 0.0:
            return 0.0
        return float(np.max(np.where(outer, magnitudes, 0.0)) / top)

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate off-grid by direct Fourier summation.

        Args:
            points: Angles of shape (P, 2)

        Returns:
            Values of shape (P, *components)
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k1, k2 = wavenumbers(self.grid)
        k1 = k1[:, 0]
        k2 = k2[0, :]
        out = np.empty((points.shape[0], *self.shape))
        for start in range(0, points.shape[0], _EVAL_CHUNK):
            chunk = points[start : start + _EVAL_CHUNK]
            e1 = np.exp(1j * np.outer(chunk[:, 0], k1))
            e2 = np.exp(1j * np.outer(chunk[:, 1], k2))
            partial_sum = np.einsum("pa,...ab->...pb", e1, self._coeffs)
            result = np.real(np.einsum("...pb,pb->...p", partial_sum, e2))
            out[start : start + chunk.shape[0]] = np.moveaxis(result, -1, 0)
        return out


class TorusScalar(TorusArray):
    """Scalar function on T²."""

    rank = 0


class TorusVec(TorusArray):
    """Vector-valued function on T² (2 or 3 components)."""

    rank = 1


class TorusMat(TorusArray):
    """Matrix-valued function on T² (2x2, 3x2 or 3x3 entries)."""

    rank = 2


_BY_RANK = {0: TorusScalar, 1: TorusVec, 2: TorusMat}


def wrap(coeffs: np.ndarray) -> TorusArray:
    """Wrap a coefficient block in the class matching its component rank."""
    return _BY_RANK.get(np.ndim(coeffs) - 2, TorusArray)(coeffs)


def from_values(values: np.ndarray) -> TorusArray:
    """Analyze grid values into the class matching their component rank."""
    values = np.asarray(values, dtype=float)
    return _BY_RANK.get(values.ndim - 2, TorusArray).from_values(values)


def _constant_coeffs(value: Any, like: TorusArray) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    out = np.zeros(like.coeffs.shape, dtype=complex)
    out[..., 0, 0] = value
    return out


def _resize_coeffs(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    n1, n2 = coeffs.shape[-2:]
    m1, m2 = grid
    keep1 = min(n1, m1) // 2
    keep2 = min(n2, m2) // 2
    k1 = np.arange(-keep1 + 1, keep1)
    k2 = np.arange(-keep2 + 1, keep2)
    out = np.zeros((*coeffs.shape[:-2], m1, m2), dtype=complex)
    out[..., (k1 % m1)[:, None], (k2 % m2)[None, :]] = coeffs[
        ..., (k1 % n1)[:, None], (k2 % n2)[None, :]
    ]
    return out


# Module-level operations


def analyze(values: np.ndarray) -> TorusArray:
    """Grid values to coefficients."""
    return from_values(values)


def synthesize(f: TorusArray) -> np.ndarray:
    """Coefficients to grid values."""
    return f.values()


def mean(f: TorusArray) -> Union[float, np.ndarray]:
    return f.mean()


def partial(f: TorusArray, axis: int) -> TorusArray:
    return f.derivative(axis)


def l_omega(f: TorusArray, omega: Any) -> TorusArray:
    """Derivative of f along the constant field ω: g_k = i(k·ω) f_k."""
    return f.l_omega(omega)


def product(f: TorusArray, g: TorusArray) -> TorusArray:
    """
    Pointwise product with 3/2-rule zero padding.

    Component axes broadcast like numpy arrays.
    """
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    n1, n2 = f.grid
    padded = (3 * n1 // 4 * 2, 3 * n2 // 4 * 2)
    fv = f.resize(padded).values()
    gv = g.resize(padded).values()
    return from_values(fv * gv).resize(f.grid)


def shift_jacobian_det(v: TorusVec) -> np.ndarray:
    """det(I + Dv) on the grid."""
    dv = v.gradient().values()  # (2, 2, N1, N2), dv[i, j] = ∂_j v_i
    return (1 + dv[0, 0]) * (1 + dv[1, 1]) - dv[0, 1] * dv[1, 0]


def compose_shift(f: TorusArray, v: TorusVec) -> TorusArray:
    """
    Pull back f by the near-identity map Φ(φ) = φ + v(φ).

    Args:
        f: Function to compose (any component shape)
        v: Displacement with two components

    Returns:
        f∘(id + v) sampled on the grid and re-analyzed

    Raises:
        NotDiffeomorphism: If det(I + Dv) <= 0 at some grid node
    """
    if v.shape != (2,):
        raise ValueError(f"displacement must have two components, got {v.shape}")
    if not np.any(v.coeffs):
        return f
    det = shift_jacobian_det(v)
    if np.min(det) <= 0:
        raise NotDiffeomorphism()
    phi1, phi2 = grid_points(v.grid)
    dv = v.values()
    points = np.stack([(phi1 + dv[0]).ravel(), (phi2 + dv[1]).ravel()], axis=1)
    sampled = f.resize(v.grid).evaluate_at(points)  # (P, *components)
    sampled = np.moveaxis(sampled, 0, -1).reshape(*f.shape, *v.grid)
    return from_values(sampled)


def invert_shift(v: TorusVec, tol: Optional[float] = None, max_iter: Optional[int] = None):
    """
    Displacement w with (id + w) = (id + v)⁻¹.

    Solves w = −v∘(id + w) by fixed-point iteration, which contracts with
    rate ‖Dv‖∞.
    """
    settings = SolverConfig.spectral()
    tol = settings.inverse_tol if tol is None else tol
    max_iter = settings.inverse_max_iter if max_iter is None else max_iter
    phi1, phi2 = grid_points(v.grid)
    w = -v.values()
    for iteration in range(max_iter):
        points = np.stack([(phi1 + w[0]).ravel(), (phi2 + w[1]).ravel()], axis=1)
        updated = -v.evaluate_at(points).T.reshape(2, *v.grid)
        change = float(np.max(np.abs(updated - w)))
        w = updated
        if change < tol:
            logger.debug(f"inverse shift converged in {iteration + 1} iterations")
            break
    else:
        logger.warning(f"inverse shift stopped at change {change:.3e} after {max_iter} iterations")
    return TorusVec.from_values(w)


def strip_norm(f: TorusArray, rho: float) -> float:
    """
    Upper bound Σ_k |c_k| e^{ρ(|k₁|+|k₂|)} for the sup norm on the complex strip.

    Vector and matrix arrays return the largest component value.
    """
    if rho < 0:
        raise ValueError("strip width must be nonnegative")
    n1, n2 = f.grid
    if rho * (n1 / 2 + n2 / 2) > SolverConfig.spectral().overflow_guard:
        raise ValueError(f"strip width {rho} overflows on grid {n1}x{n2}")
    k1, k2 = wavenumbers(f.grid)
    weights = np.exp(rho * (np.abs(k1) + np.abs(k2)))
    totals = np.sum(np.abs(f.coeffs) * weights, axis=(-2, -1))
    return float(np.max(totals)) if np.ndim(totals) else float(totals)


def analyticity_strip(f: TorusArray) -> float:
    """Strip width estimated from the decay slope of shell-maximal coefficients."""
    k1, k2 = wavenumbers(f.grid)
    shells = np.abs(k1) + np.abs(k2)
    magnitudes = np.max(np.abs(f.coeffs).reshape(-1, *f.grid), axis=0)
    top = magnitudes.max()
    if top == 0.0:
        return float("inf")
    orders, logs = [], []
    for m in range(1, int(shells.max()) + 1):
        shell_max = magnitudes[shells == m].max(initial=0.0)
        if shell_max > 1e-14 * top:
            orders.append(m)
            logs.append(np.log(shell_max))
    if len(orders) < 3:
        return float("inf")
    slope = np.polyfit(orders, logs, 1)[0]
    return float(max(-slope, 0.0))


def periodic_antiderivative(values: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Split samples of a periodic function of one angle into mean and primitive.

    Returns:
        (F, mean) with F' = f − mean, F periodic and F(0) = 0
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    coeffs = np.fft.fft(values) / n
    k = np.fft.fftfreq(n, 1.0 / n).round()
    avg = float(np.real(coeffs[0]))
    integ = np.zeros_like(coeffs)
    nonzero = (k != 0) & (2 * np.abs(k) < n)
    integ[nonzero] = coeffs[nonzero] / (1j * k[nonzero])
    primitive = np.real(np.fft.ifft(integ * n))
    return primitive - primitive[0], avg


def derivative_1d(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative of samples of a periodic function of one angle (last axis)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    k = np.fft.fftfreq(n, 1.0 / n).round()
    multiplier = np.where(2 * np.abs(k) < n, (1j * k) ** order, 0.0)
    return np.real(np.fft.ifft(np.fft.fft(values, axis=-1) * multiplier, axis=-1))
