"""
Normal-direction jet extension of Beltrami and harmonic fields off a torus.

The chart x = K(φ) + tν(φ), with ν the outward unit normal, has the
block-diagonal metric diag(g(t), 1) where

    g(t) = G + t(DKᵀDν + DνᵀDK) + t²DνᵀDν.

With B♭ = β_a dφ^a + w dt and q = √g·w the system curl B = λB, div B = 0
becomes

    ∂_t β₁ = ∂₁w + λ(√g g⁻¹β)²
    ∂_t β₂ = ∂₂w − λ(√g g⁻¹β)¹
    ∂_t q  = −∂_a(√g g⁻¹β)^a

which is solved order by order in t from β(0) = GX, q(0) = 0. The normal
curl component ∂₁β₂ − ∂₂β₁ = λq is transported by this system, so the closed
datum d(GX) = 0 is the only solvability condition.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .config import SolverConfig
from .exceptions import ConstraintViolated, FocalPoint, OutOfValidity
from .fields.base import curl_from_jacobian
from .hj import closedness_residual
from .spectral import TorusArray, TorusScalar, TorusVec
from .torus_geom import Embedding

logger = logging.getLogger(__name__)

_VALIDITY_SAMPLES = 32


class TaylorSeries:
    """
    Truncated power series Σ c_j t^j whose coefficients are arrays.

    Coefficients of a series share one shape, and products are taken
    pointwise, so a series of grid arrays is a series of functions on T².
    """

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)
        if self.c.ndim == 0:
            raise ValueError("series needs at least one coefficient")

    @classmethod
    def constant(cls, value, order: int) -> "TaylorSeries":
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1, *value.shape))
        c[0] = value
        return cls(c)

    @classmethod
    def polynomial(cls, coeffs: list, order: int) -> "TaylorSeries":
        """Series of a polynomial, padded or truncated to the order."""
        first = np.asarray(coeffs[0], dtype=float)
        c = np.zeros((order + 1, *first.shape))
        for j, value in enumerate(coeffs[: order + 1]):
            c[j] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    def __getitem__(self, j: int) -> np.ndarray:
        return self.c[j]

    def __add__(self, other):
        if isinstance(other, TaylorSeries):
            order = min(self.order, other.order)
            return TaylorSeries(self.c[: order + 1] + other.c[: order + 1])
        out = self.c.copy()
        out[0] = out[0] + other
        return TaylorSeries(out)

    def __radd__(self, other):
        return self + other

    def __neg__(self):
        return TaylorSeries(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return -self + other

    def __mul__(self, other):
        if isinstance(other, TaylorSeries):
            order = min(self.order, other.order)
            out = np.stack([convolve_at(self.c, other.c, j) for j in range(order + 1)])
            return TaylorSeries(out)
        return TaylorSeries(self.c * other)

    def __rmul__(self, other):
        return self * other

    def reciprocal(self) -> "TaylorSeries":
        """1/f, requiring f(0) ≠ 0 everywhere."""
        if np.any(self.c[0] == 0):
            raise ZeroDivisionError("leading coefficient vanishes")
        out = np.zeros_like(self.c)
        out[0] = 1.0 / self.c[0]
        for n in range(1, self.order + 1):
            acc = sum(out[i] * self.c[n - i] for i in range(n))
            out[n] = -acc / self.c[0]
        return TaylorSeries(out)

    def __truediv__(self, other):
        if isinstance(other, TaylorSeries):
            return self * other.reciprocal()
        return TaylorSeries(self.c / other)

    def sqrt(self) -> "TaylorSeries":
        """Principal square root, requiring f(0) > 0 everywhere."""
        if np.any(self.c[0] <= 0):
            raise ValueError("square root of a series with non-positive leading term")
        out = np.zeros_like(self.c)
        out[0] = np.sqrt(self.c[0])
        for n in range(1, self.order + 1):
            acc = sum(out[i] * out[n - i] for i in range(1, n))
            out[n] = (self.c[n] - acc) / (2 * out[0])
        return TaylorSeries(out)

    def deriv(self) -> "TaylorSeries":
        if self.order == 0:
            return TaylorSeries(np.zeros_like(self.c))
        weights = np.arange(1, self.order + 1).reshape(-1, *([1] * (self.c.ndim - 1)))
        return TaylorSeries(self.c[1:] * weights)

    def __call__(self, t):
        """Horner evaluation; t broadcasts against the coefficient shape."""
        out = np.zeros_like(self.c[0]) + 0.0 * np.asarray(t, dtype=float)
        for coeff in self.c[::-1]:
            out = out * t + coeff
        return out

    def __repr__(self) -> str:
        return f"TaylorSeries(order={self.order}, shape={self.c.shape[1:]})"


def convolve_at(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Coefficient n of the product of two coefficient stacks."""
    return sum(a[i] * b[n - i] for i in range(n + 1))


@dataclass(frozen=True)
class JetField:
    """
    Finite-order jet B(K(φ) + tν(φ)) ≈ Σ_j B_j(φ)t^j.

    Attributes:
        base: Torus the jet is anchored on
        unit_normal: ν, outward
        order: J
        coeffs: B_0..B_J as 3-vector functions on T²
        t_range: Validity interval of t
        lam: Beltrami factor λ
        t_cap: Largest t allowed by the focal bound
    """

    base: Embedding
    unit_normal: TorusVec
    order: int
    coeffs: tuple[TorusVec, ...]
    t_range: tuple[float, float]
    lam: float
    t_cap: float

    @property
    def block(self) -> TorusArray:
        """All coefficients as one array function of shape (J+1, 3)."""
        return TorusArray(np.stack([c.coeffs for c in self.coeffs]))

    @property
    def grid(self):
        return self.base.grid

    def contains(self, t: Union[float, np.ndarray]) -> bool:
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_range
        return bool(np.all((t >= lo) & (t <= hi)))

    def trace(self) -> np.ndarray:
        """B at t = 0 on the grid, shape (3, N₁, N₂)."""
        return self.coeffs[0].values()

    def __repr__(self) -> str:
        lo, hi = self.t_range
        return f"JetField(order={self.order}, lam={self.lam:g}, t_range=({lo:.3e}, {hi:.3e}))"


def check_constraint(K: Embedding, X: TorusVec) -> float:
    """Closedness ‖∂₁w₂ − ∂₂w₁‖∞ of the pulled-back covector w = G·X."""
    covector = np.einsum("abxy,bxy->axy", K.g_values, X.values())
    return closedness_residual(covector)


def focal_distance(K: Embedding) -> float:
    """1/max|κ| over the grid, κ the principal curvatures (eigenvalues of G⁻¹II)."""
    ddk = K.DK.gradient().values()  # (3, 2, 2, N1, N2)
    nu = K.n_values / np.sqrt(K.n_sq_values)
    second = np.einsum("iabxy,ixy->abxy", ddk, nu)
    shape_op = np.einsum("acxy,cbxy->abxy", K.g_inv_values, second)
    eig = np.linalg.eigvals(np.moveaxis(shape_op, (0, 1), (-2, -1)))
    kappa = float(np.max(np.abs(eig)))
    return np.inf if kappa == 0.0 else 1.0 / kappa


def _d(values: np.ndarray, axis: int) -> np.ndarray:
    return TorusScalar.from_values(values).derivative(axis).values()


def _chart_metric(dk: np.ndarray, dnu: np.ndarray, order: int) -> list[list[TaylorSeries]]:
    g0 = np.einsum("iaxy,ibxy->abxy", dk, dk)
    g1 = np.einsum("iaxy,ibxy->abxy", dk, dnu)
    g1 = g1 + np.swapaxes(g1, 0, 1)
    g2 = np.einsum("iaxy,ibxy->abxy", dnu, dnu)
    return [
        [TaylorSeries.polynomial([g0[a, b], g1[a, b], g2[a, b]], order) for b in range(2)]
        for a in range(2)
    ]


def _contract(op: list[list[TaylorSeries]], beta: np.ndarray, j: int) -> np.ndarray:
    """Coefficient j of the series (op·β)^a, shape (2, N₁, N₂)."""
    return np.stack(
        [sum(convolve_at(op[a][b].c, beta[:, b], j) for b in range(2)) for a in range(2)]
    )


def extend_jet(
    K: Embedding,
    X: TorusVec,
    lam: float,
    order: Optional[int] = None,
    t_max: Optional[float] = None,
    one_sided: bool = True,
) -> JetField:
    """
    Extend the tangent datum X off the torus as a jet of curl B = λB, div B = 0.

    Args:
        K: Analytic torus
        X: Tangent field in surface coordinates, with closed dual form
        lam: Beltrami factor (0 for the harmonic extension)
        order: Jet order J ≥ 2
        t_max: Largest |t| considered (default: focal_fraction × focal distance)
        one_sided: Keep only t ≥ 0 in the validity range

    Raises:
        ConstraintViolated: If d(GX) ≠ 0 beyond the configured tolerance
        FocalPoint: If t_max reaches the focal distance
    """
    settings = SolverConfig.jet()
    order = settings.order if order is None else int(order)
    if order < 2:
        raise ValueError(f"jet order must be >= 2, got {order}")
    if X.shape != (2,):
        raise ValueError(f"Cauchy datum needs two surface components, got {X.shape}")

    closed = check_constraint(K, X)
    if closed > settings.constraint_tol:
        raise ConstraintViolated(closed, settings.constraint_tol)

    focal = focal_distance(K)
    t_cap = settings.focal_fraction * focal if t_max is None else float(t_max)
    if not 0 < t_cap < focal:
        raise FocalPoint(f"t_max={t_cap:.3e} not inside the focal distance {focal:.3e}")

    sigma = K.orientation
    nu = TorusVec.from_values(sigma * K.n_values / np.sqrt(K.n_sq_values))
    dk = K.dk_values
    dnu = nu.gradient().values()

    g = _chart_metric(dk, dnu, order)
    det = g[0][0] * g[1][1] - g[0][1] * g[0][1]
    if np.min(det(t_cap)) <= 0 or (not one_sided and np.min(det(-t_cap)) <= 0):
        raise FocalPoint("chart metric degenerates inside the requested range")
    inv_root = det.sqrt().reciprocal()
    adj = [[g[1][1], -g[0][1]], [-g[1][0], g[0][0]]]
    flux_op = [[adj[a][b] * inv_root for b in range(2)] for a in range(2)]
    inverse = [[flux_op[a][b] * inv_root for b in range(2)] for a in range(2)]

    grid = K.grid
    beta = np.zeros((order + 1, 2, *grid))
    q = np.zeros((order + 1, *grid))
    w = np.zeros((order + 1, *grid))
    beta[0] = np.einsum("abxy,bxy->axy", K.g_values, X.values())

    for j in range(order):
        w[j] = convolve_at(q, inv_root.c, j)
        flux = _contract(flux_op, beta, j)
        beta[j + 1, 0] = (_d(w[j], 0) + sigma * lam * flux[1]) / (j + 1)
        beta[j + 1, 1] = (_d(w[j], 1) - sigma * lam * flux[0]) / (j + 1)
        q[j + 1] = -(_d(flux[0], 0) + _d(flux[1], 1)) / (j + 1)
    w[order] = convolve_at(q, inv_root.c, order)

    u = np.stack([_contract(inverse, beta, j) for j in range(order + 1)])  # (J+1, 2, N1, N2)
    nu_values = nu.values()
    coeffs = []
    for j in range(order + 1):
        b_j = np.einsum("iaxy,axy->ixy", dk, u[j]) + w[j] * nu_values
        if j > 0:
            b_j = b_j + np.einsum("iaxy,axy->ixy", dnu, u[j - 1])
        coeffs.append(TorusVec.from_values(b_j))

    provisional = (0.0 if one_sided else -t_cap, t_cap)
    jet = JetField(
        base=K,
        unit_normal=nu,
        order=order,
        coeffs=tuple(coeffs),
        t_range=provisional,
        lam=float(lam),
        t_cap=t_cap,
    )
    radius = validity_radius(jet)
    if radius == 0.0:
        logger.warning(f"[CK] jet residual above threshold at every sampled t (order {order})")
    jet = replace(jet, t_range=(0.0 if one_sided else -radius, radius))
    logger.info(
        f"[CK] order {order} jet with lambda={lam:.6g}: validity radius {radius:.3e} "
        f"(focal distance {focal:.3e})"
    )
    return jet


def _powers(t: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """t^j and d/dt t^j for j = 0..J along a trailing axis."""
    t = np.asarray(t, dtype=float)[..., None]
    j = np.arange(order + 1)
    powers = t ** j
    slopes = np.zeros_like(powers)
    slopes[..., 1:] = j[1:] * powers[..., :-1]
    return powers, slopes


def eval_jet(F: JetField, angles: np.ndarray, t) -> tuple[np.ndarray, np.ndarray]:
    """
    Value and ambient Jacobian of a jet at chart coordinates.

    Args:
        F: Jet field
        angles: Angles of shape (P, 2) or (2,)
        t: Normal coordinate, scalar or shape (P,)

    Returns:
        (values (P, 3), jacobians (P, 3, 3)), squeezed for a single point

    Raises:
        OutOfValidity: If some t lies outside F.t_range
    """
    single = np.ndim(angles) == 1
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), angles.shape[:1])
    if not F.contains(t):
        bad = t[(t < F.t_range[0]) | (t > F.t_range[1])][0]
        raise OutOfValidity(float(bad), F.t_range)

    block = F.block
    coeffs = block.evaluate_at(angles)  # (P, J+1, 3)
    grads = block.gradient().evaluate_at(angles)  # (P, J+1, 3, 2)
    powers, slopes = _powers(t, F.order)
    value = np.einsum("pj,pji->pi", powers, coeffs)
    d_phi = np.einsum("pj,pjia->pia", powers, grads)
    d_t = np.einsum("pj,pji->pi", slopes, coeffs)

    dk = F.base.tangent_at(angles)  # (P, 3, 2)
    nu = F.unit_normal.evaluate_at(angles)  # (P, 3)
    dnu = F.unit_normal.gradient().evaluate_at(angles)
    chart = np.concatenate([dk + t[:, None, None] * dnu, nu[:, :, None]], axis=2)
    d_chart = np.concatenate([d_phi, d_t[:, :, None]], axis=2)
    jac = d_chart @ np.linalg.inv(chart)
    if single:
        return value[0], jac[0]
    return value, jac


def _grid_state(F: JetField, t: float) -> tuple[np.ndarray, np.ndarray]:
    """B and its ambient Jacobian on the grid at fixed t, shapes (3, N₁, N₂), (3, 3, N₁, N₂)."""
    values = np.stack([c.values() for c in F.coeffs])  # (J+1, 3, N1, N2)
    grads = np.stack([c.gradient().values() for c in F.coeffs])  # (J+1, 3, 2, N1, N2)
    powers, slopes = _powers(np.asarray(t), F.order)
    value = np.einsum("j,jixy->ixy", powers, values)
    d_phi = np.einsum("j,jiaxy->iaxy", powers, grads)
    d_t = np.einsum("j,jixy->ixy", slopes, values)

    nu = F.unit_normal.values()
    dnu = F.unit_normal.gradient().values()
    chart = np.concatenate([F.base.dk_values + t * dnu, nu[:, None]], axis=1)
    d_chart = np.concatenate([d_phi, d_t[:, None]], axis=1)
    chart = np.moveaxis(chart, (0, 1), (-2, -1))
    d_chart = np.moveaxis(d_chart, (0, 1), (-2, -1))
    jac = np.moveaxis(d_chart @ np.linalg.inv(chart), (-2, -1), (0, 1))
    return value, jac


def jet_residuals(F: JetField, t: float) -> tuple[float, float]:
    """
    (‖curl B − λB‖∞, ‖div B‖∞) on the grid at fixed t.

    Uses the analytic jet Jacobian; valid anywhere inside the focal bound.
    """
    value, jac = _grid_state(F, t)
    ambient = np.moveaxis(jac, (0, 1), (-2, -1))
    curl = np.moveaxis(curl_from_jacobian(ambient), -1, 0)
    div = np.trace(jac, axis1=0, axis2=1)
    return float(np.max(np.abs(curl - F.lam * value))), float(np.max(np.abs(div)))


def validity_radius(F: JetField, threshold: Optional[float] = None) -> float:
    """
    Largest sampled t ≤ t_cap with both residuals below the threshold.

    The scan is geometric from t_cap/1000 and stops at the first failure.
    Two-sided jets use the smaller of the two one-sided radii.
    """
    threshold = SolverConfig.jet().validity_threshold if threshold is None else threshold
    samples = np.geomspace(F.t_cap * 1e-3, F.t_cap, _VALIDITY_SAMPLES)
    signs = (1.0,) if F.t_range[0] >= 0 else (1.0, -1.0)
    radius = np.inf
    for sign in signs:
        reached = 0.0
        for t in samples:
            if max(jet_residuals(F, sign * t)) >= threshold:
                break
            reached = float(t)
        radius = min(radius, reached)
    return float(radius)
