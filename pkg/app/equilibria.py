"""
Piecewise-smooth equilibria assembled from Beltrami layers.

Layer k lives between an inner torus (none for the core) and an outer
torus, carries a jet of curl B = λ_k B anchored on its inner boundary, and
meets layer k+1 on a shared interface. Across an interface the tangent
fields satisfy |X_{k+1}|² = (1+b_{k+1})|X_k|² + c_{k+1}, with X_k the layer
field before rescaling. The physical field of layer k is scale_k·X_k with
scale_k = Π_{j≤k}(1+b_j)^{-1/2}, so the physical jump of |B|² across
interface k is scale_{k+1}²·c_{k+1} and pressures telescope accordingly.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .ck_extend import JetField, extend_jet, validity_radius
from .config import EquilibriumMode, SolverConfig
from .exceptions import (
    ConfigError,
    DivergenceError,
    ForbiddenEigenvalue,
    GeometryError,
    MFloorViolated,
    OutOfValidity,
    PyBeltramiError,
    ResidualAboveTolerance,
    TwistTooSmall,
    TypeIIDegenerate,
)
from .fields import AmbientField, JetAmbientField
from .formats import write_array, write_convergence, write_manifest
from .hj import HjState, normalize_datum, normalized_jump, solve_hj
from .kam import KamState, continue_family, family_target
from .smalldiv import Frequency2, certify
from .spectral import TorusVec, compose_shift, periodic_antiderivative
from .torus_geom import (
    Embedding,
    cross,
    dot,
    mean_minor_radius,
    nested_distance,
    nondeg_type_I,
    nondeg_type_II,
    surface_divergence,
    twist_data,
    twist_update_coefficients,
)

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (np.sqrt(5.0) - 1.0) / 2.0

_TANGENCY_TOL = 1e-8
_SHEET_DIVERGENCE_TOL = 1e-8
_SHEET_TANGENCY_TOL = 1e-12


# Seeds


@dataclass
class Seed:
    """
    Innermost torus with its Beltrami field.

    Attributes:
        K: Seed torus, parametrized so the field on it is linear
        frequency: Certified frequency of the field on K
        lam: Beltrami factor of the core
        jet: Two-sided jet anchored on K
        field: The jet as an ambient field
        major_radius: Axis radius used for nesting diagnostics
        twist: Twist constant of K in the field
        type_I: det M of the type-I certificate
        type_II: Normalized type-II value
    """

    K: Embedding
    frequency: Frequency2
    lam: float
    jet: JetField
    field: AmbientField
    major_radius: float
    twist: float = float("nan")
    type_I: float = float("nan")
    type_II: float = float("nan")

    @property
    def omega(self) -> np.ndarray:
        return np.array(self.frequency.omega)


def _standard_torus_values(
    major_radius: float, minor_radius: float, shear: np.ndarray, grid: tuple[int, int]
) -> np.ndarray:
    n1, n2 = grid
    theta1 = 2 * np.pi * np.arange(n1) / n1
    theta2 = 2 * np.pi * np.arange(n2) / n2
    phi1 = theta1[:, None] + shear[None, :]
    rho = (major_radius + minor_radius * np.cos(theta2))[None, :]
    return np.stack(
        [
            rho * np.cos(phi1),
            rho * np.sin(phi1),
            np.broadcast_to(minor_radius * np.sin(theta2)[None, :], (n1, n2)),
        ]
    )


def synthetic_beltrami_seed(
    major_radius: float = 3.0,
    minor_radius: float = 0.3,
    ratio: float = GOLDEN_RATIO,
    lam: float = 0.5,
    order: Optional[int] = None,
    grid: tuple[int, int] = (32, 32),
    gamma: float = 1e-3,
    tau: float = 1.5,
    k_max: int = 40,
) -> Seed:
    """
    Standard torus carrying a constant-covector field, extended as a Beltrami jet.

    In the toroidal angle φ₁ and poloidal angle θ₂ the covector (1, q) is
    closed and its field is (1/ρ², q/s₀²), ρ = R + s₀cos θ₂. The shear
    φ₁ = θ₁ + h(θ₂), h' = (1/ρ² − ω₁)/ω₂, makes it linear with frequency
    (ω₁, ω₂) = ([1/ρ²], q/s₀²), and q is fixed by ω₂/ω₁ = ratio. The field is
    then scaled to [|Y|²] = 1.

    Raises:
        GeometryError: If the radii do not describe an embedded torus
        NotDiophantineUpToCutoff: If the ratio does not certify
    """
    if not 0 < minor_radius < major_radius:
        raise GeometryError(
            f"need 0 < minor radius < major radius, got {minor_radius}, {major_radius}"
        )
    order = SolverConfig.equilibria().order if order is None else order
    n2 = grid[1]
    theta2 = 2 * np.pi * np.arange(n2) / n2
    inv_sq = 1.0 / (major_radius + minor_radius * np.cos(theta2)) ** 2
    omega1 = float(np.mean(inv_sq))
    omega2 = ratio * omega1
    shear, _ = periodic_antiderivative((inv_sq - omega1) / omega2)

    K = Embedding.from_values(_standard_torus_values(major_radius, minor_radius, shear, grid))
    _, w_hat = normalize_datum(K.G, (omega1, omega2))
    frequency = certify(w_hat, gamma, tau, k_max)

    jet = extend_jet(K, TorusVec.constant(w_hat, grid), lam, order=order, one_sided=False)
    ambient = JetAmbientField(jet)
    _, twist = twist_data(K, w_hat, ambient)
    _, det_m = nondeg_type_I(K, w_hat)
    type_ii = nondeg_type_II(K, w_hat, ambient, lam, normalized=True)
    logger.info(
        f"[Equilibria] seed R={major_radius:g} s0={minor_radius:g} ratio={ratio:.12g}: "
        f"T={twist:.6e} det M={det_m:.6e} type II={type_ii:.6e}"
    )
    return Seed(
        K=K,
        frequency=frequency,
        lam=float(lam),
        jet=jet,
        field=ambient,
        major_radius=float(major_radius),
        twist=twist,
        type_I=det_m,
        type_II=type_ii,
    )


# Layers and equilibria


@dataclass
class Layer:
    """
    One region of an equilibrium.

    Attributes:
        index: 1 for the core
        inner: Inner boundary (None for the core), parametrized linearly
        outer: Outer boundary, an invariant torus of the layer field
        lam: Beltrami factor
        field: Layer field X_k (before rescaling)
        jet: Jet behind the field
        omega: Frequency of the field on the outer torus
        c: Jump constant across the inner boundary
        b: Norm rescaling constant from the interface solve
        scale: Physical scale Π(1+b_j)^{-1/2}
        inner_omega: Frequency of the field on the inner torus
        twist: Twist constant on the inner torus (the seed torus for the core)
        det_M: Type-I determinant on the outer torus
        hj: Interface solve, when one was needed
        kam: Outward continuation of the outer torus
    """

    index: int
    inner: Optional[Embedding]
    outer: Embedding
    lam: float
    field: AmbientField
    jet: Optional[JetField]
    omega: np.ndarray
    c: float = 0.0
    b: float = 0.0
    scale: float = 1.0
    inner_omega: Optional[np.ndarray] = None
    twist: float = float("nan")
    det_M: float = float("nan")
    hj: Optional[HjState] = None
    kam: Optional[KamState] = None

    def physical_values(self, K: Embedding) -> np.ndarray:
        """scale·X on the grid of K, shape (3, N₁, N₂)."""
        return self.scale * K.field_values(self.field)


@dataclass
class Equilibrium:
    """
    Nested layers with their pressures and weak-solution residuals.

    Attributes:
        mode: Construction that produced it
        layers: Ordered from the core outwards
        pressures: p_k per layer
        p_boundary: Value of the total pressure outside
        major_radius: Axis radius for nesting diagnostics
        residuals: Named post-check values
        sheet: Free-boundary surface current on the outer boundary
    """

    mode: EquilibriumMode
    layers: list[Layer]
    pressures: list[float]
    p_boundary: float = 0.0
    major_radius: float = float("nan")
    residuals: dict[str, float] = field(default_factory=dict)
    sheet: Optional[np.ndarray] = None

    @property
    def lambdas(self) -> list[float]:
        return [layer.lam for layer in self.layers]

    @property
    def jumps(self) -> list[float]:
        return [layer.c for layer in self.layers[1:]]

    @property
    def rescalings(self) -> list[float]:
        return [layer.b for layer in self.layers[1:]]

    def interfaces(self) -> list[tuple[Layer, Layer]]:
        return list(zip(self.layers[:-1], self.layers[1:]))

    def scalars(self) -> dict[str, Any]:
        """Per-layer constants as plain lists, for manifests."""
        return {
            "mode": self.mode.value,
            "lambda": self.lambdas,
            "c": [layer.c for layer in self.layers],
            "b": [layer.b for layer in self.layers],
            "scale": [layer.scale for layer in self.layers],
            "pressure": list(self.pressures),
            "twist": [layer.twist for layer in self.layers],
            "det_M": [layer.det_M for layer in self.layers],
            "omega": [list(map(float, layer.omega)) for layer in self.layers],
            "p_boundary": self.p_boundary,
        }


def _interface_values(lower: Layer, upper: Layer) -> tuple[Embedding, np.ndarray, np.ndarray]:
    if upper.inner is None:
        raise GeometryError(f"layer {upper.index} has no inner boundary")
    K = upper.inner
    return K, K.field_values(lower.field), K.field_values(upper.field)


def jump_residual(lower: Layer, upper: Layer) -> float:
    """max | |X_{k+1}|² − (1+b_{k+1})|X_k|² − c_{k+1} | on the shared torus."""
    _, x_lower, x_upper = _interface_values(lower, upper)
    mismatch = dot(x_upper, x_upper) - (1 + upper.b) * dot(x_lower, x_lower) - upper.c
    return float(np.max(np.abs(mismatch)))


def continuity_residual(lower: Layer, upper: Layer) -> float:
    """‖B_k − B_{k+1}‖∞ of the physical fields on the shared torus."""
    _, x_lower, x_upper = _interface_values(lower, upper)
    return float(np.max(np.abs(lower.scale * x_lower - upper.scale * x_upper)))


def tangency(field_: AmbientField, K: Embedding) -> float:
    """max |B·n| / (|B||n|) over the grid of K."""
    values = K.field_values(field_)
    norms = np.sqrt(dot(values, values) * K.n_sq_values)
    return float(np.max(np.abs(dot(values, K.n_values)) / np.maximum(norms, 1e-300)))


def pressures(
    c: Sequence[float],
    b: Sequence[float],
    p1: Optional[float] = None,
    p_boundary: float = 0.0,
) -> list[float]:
    """
    Layer pressures from the interface constants.

    p_k = p₁ − ½Σ_{l=2..k} Π_{j=2..l}(1+b_j)⁻¹ c_l, where c and b list
    c_2..c_N and b_2..b_N. Without p₁ the sequence is shifted to end at
    p_boundary exactly.

    Raises:
        ValueError: If the lists differ in length or some 1+b_j ≤ 0
    """
    if len(c) != len(b):
        raise ValueError(f"{len(c)} jump constants but {len(b)} rescalings")
    offsets = [0.0]
    factor = 1.0
    for c_l, b_l in zip(c, b):
        if 1 + b_l <= 0:
            raise ValueError(f"rescaling 1+b={1 + b_l} is not positive")
        factor /= 1 + b_l
        offsets.append(offsets[-1] + 0.5 * factor * c_l)
    if p1 is not None:
        return [p1 - o for o in offsets]
    last = offsets[-1]
    return [p_boundary + (last - o) for o in offsets]


def _distinct_lambdas(lambdas: Sequence[float]) -> None:
    for k in range(1, len(lambdas)):
        if lambdas[k] == lambdas[k - 1]:
            raise ConfigError(f"consecutive layers {k} and {k + 1} share lambda={lambdas[k]}")


def _target_certificate(seed: Seed, omega: np.ndarray) -> tuple[float, float, int]:
    scale = float(np.linalg.norm(omega)) / seed.frequency.norm
    return seed.frequency.gamma * scale, seed.frequency.tau, seed.frequency.k_max


def _step_distance(jet: JetField) -> float:
    settings = SolverConfig.equilibria()
    radius = validity_radius(jet, settings.layer_jet_threshold)
    if radius == 0.0:
        radius = jet.t_range[1]
        logger.warning(
            f"[Equilibria] no sampled t meets {settings.layer_jet_threshold:.0e}; "
            f"stepping within the jet range {radius:.3e}"
        )
    if radius <= 0.0:
        raise GeometryError("jet has an empty validity range")
    return settings.step_fraction * radius / 2


def outward_torus(
    K: Embedding,
    omega: np.ndarray,
    twist: float,
    ambient: AmbientField,
    jet: JetField,
    certificate: tuple[float, float, int],
) -> tuple[KamState, Frequency2]:
    """
    Invariant torus of the layer field one step outside K.

    The step stays within half the jet range. A run that leaves the jet or
    diverges is retried with half the step.

    Raises:
        OutOfValidity, DivergenceError: If every retry fails
        GeometryError: If the torus lands inside K
    """
    settings = SolverConfig.equilibria()
    distance = min(_step_distance(jet), jet.t_range[1] / 2)
    start = KamState(K=K, err=0.0, twist=twist)
    for attempt in range(settings.step_retries + 1):
        target = family_target(start, omega, distance, K.orientation, *certificate)
        (member,) = continue_family(
            K, omega, ambient, [target], tol=settings.kam_tol, workers=1, floor=settings.kam_floor
        )
        if member.ok:
            break
        if not isinstance(member.error, (OutOfValidity, DivergenceError)):
            raise member.error
        if attempt == settings.step_retries:
            raise member.error
        distance /= 2
        logger.warning(
            f"[Equilibria] continuation failed ({member.error}); retrying with step {distance:.3e}"
        )
    if member.side != 1:
        raise GeometryError(f"continued torus landed on side {member.side}, not outside")
    return member.state, target


def _guard_lambda(K: Embedding, omega: np.ndarray, lower: Layer, lam: float) -> None:
    update = twist_update_coefficients(K, omega, lower.field, lower.lam)
    gap = update.gap()
    logger.debug(
        f"[Equilibria] forbidden lambda {update.forbidden:.6e} (gap {gap:.3e}) for layer "
        f"{lower.index + 1}"
    )
    if abs(lam - update.forbidden) < gap:
        raise ForbiddenEigenvalue(lam, update.forbidden, gap)


def _check_twist(twist: float) -> None:
    floor = SolverConfig.kam().twist_floor
    if not abs(twist) > floor:
        raise TwistTooSmall(twist, floor)


def _check_det(det: float) -> None:
    floor = SolverConfig.equilibria().det_floor
    if not abs(det) > floor:
        raise MFloorViolated(det, floor)


def _core_layer(seed: Seed) -> Layer:
    return Layer(
        index=1,
        inner=None,
        outer=seed.K,
        lam=seed.lam,
        field=seed.field,
        jet=seed.jet,
        omega=seed.omega,
        inner_omega=None,
        twist=seed.twist,
        det_M=seed.type_I,
    )


def _next_layer(seed: Seed, lower: Layer, lam: float, c: float, solve_interface: bool) -> Layer:
    """
    Build layer k+1 on the outer torus of layer k.

    Raises:
        PyBeltramiError/ValueError: From any stage; the caller reports the stage
    """
    settings = SolverConfig.equilibria()
    index = lower.index + 1
    K, omega = lower.outer, lower.omega
    stage = "lambda guard"
    try:
        _guard_lambda(K, omega, lower, lam)

        stage = "interface"
        if solve_interface:
            sigma, w_hat = normalize_datum(K.G, omega)
            hj_state, X_hat = solve_hj(normalized_jump(c, sigma), K.G, w_hat)
            X = X_hat / sigma
            b = hj_state.b
            inner = Embedding(compose_shift(K.K, hj_state.v))
            inner_omega = hj_state.speed * omega
        else:
            hj_state, b = None, 0.0
            X = TorusVec.constant(omega, K.grid)
            inner, inner_omega = K, omega

        stage = "extension"
        jet = extend_jet(K, X, lam, order=settings.order, one_sided=False)
        ambient = JetAmbientField(jet)

        stage = "twist"
        _, twist = twist_data(inner, inner_omega, ambient)
        _check_twist(twist)

        stage = "continuation"
        certificate = _target_certificate(seed, inner_omega)
        kam_state, target = outward_torus(inner, inner_omega, twist, ambient, jet, certificate)

        stage = "type-I certificate"
        outer_omega = kam_state.frequency(target)
        _, det_m = nondeg_type_I(kam_state.K, outer_omega)
        _check_det(det_m)
    except (PyBeltramiError, ValueError) as e:
        logger.error(f"[Equilibria] layer {index} failed at stage {stage}: {e}")
        raise

    logger.info(
        f"[Equilibria] layer {index}: lambda={lam:.6g} c={c:.3e} b={b:.6e} "
        f"T={twist:.6e} det M={det_m:.6e}"
    )
    return Layer(
        index=index,
        inner=inner,
        outer=kam_state.K,
        lam=float(lam),
        field=ambient,
        jet=jet,
        omega=outer_omega,
        c=float(c),
        b=float(b),
        scale=lower.scale / np.sqrt(1.0 + b),
        inner_omega=inner_omega,
        twist=twist,
        det_M=det_m,
        hj=hj_state,
        kam=kam_state,
    )


def _layer_residuals(eq: Equilibrium) -> dict[str, float]:
    residuals: dict[str, float] = {}
    radii = []
    for layer in eq.layers:
        residuals[f"tangency_outer_{layer.index}"] = tangency(layer.field, layer.outer)
        if layer.inner is not None:
            residuals[f"tangency_inner_{layer.index}"] = tangency(layer.field, layer.inner)
            residuals[f"nesting_{layer.index}"] = nested_distance(layer.inner, layer.outer)
        if np.isfinite(eq.major_radius):
            radii.append(mean_minor_radius(layer.outer, eq.major_radius))
    for k, (lower, upper) in enumerate(eq.interfaces(), start=1):
        residuals[f"jump_{k}"] = jump_residual(lower, upper)
        residuals[f"continuity_{k}"] = continuity_residual(lower, upper)
    if radii:
        residuals["minor_radius_growth"] = float(np.min(np.diff(radii))) if len(radii) > 1 else 0.0
    return residuals


def verify(eq: Equilibrium) -> None:
    """
    Check the recorded residuals against their tolerances.

    Raises:
        ResidualAboveTolerance: For the first failing residual
        GeometryError: If two boundaries touch on the grid
    """
    settings = SolverConfig.equilibria()
    for name, value in sorted(eq.residuals.items()):
        if name.startswith("jump_"):
            tolerance = settings.jump_tol
        elif name.startswith("tangency_"):
            tolerance = _TANGENCY_TOL
        elif name == "sheet_divergence":
            tolerance = _SHEET_DIVERGENCE_TOL
        elif name == "sheet_tangency":
            tolerance = _SHEET_TANGENCY_TOL
        elif name == "boundary_norm" or (
            name.startswith("continuity_") and eq.mode == EquilibriumMode.FORCE_FREE
        ):
            tolerance = settings.continuity_tol
        elif name.startswith("nesting_"):
            if not value > 0:
                raise GeometryError(f"boundaries of layer {name[8:]} touch on the grid")
            continue
        else:
            continue
        if not value < tolerance:
            raise ResidualAboveTolerance(name, value, tolerance)


def _build_layers(
    seed: Seed,
    lambdas: Sequence[float],
    jumps: Sequence[float],
    mode: EquilibriumMode,
    p_boundary: Optional[float],
) -> Equilibrium:
    if len(lambdas) != len(jumps) + 1:
        raise ConfigError(f"{len(lambdas)} lambdas need {len(lambdas) - 1} jumps, got {len(jumps)}")
    if lambdas[0] != seed.lam:
        raise ConfigError(f"first lambda {lambdas[0]} differs from the seed's {seed.lam}")
    _distinct_lambdas(lambdas)
    _check_det(seed.type_I)
    p_boundary = SolverConfig.equilibria().boundary_pressure if p_boundary is None else p_boundary

    layers = [_core_layer(seed)]
    for lam, c in zip(lambdas[1:], jumps):
        layers.append(_next_layer(seed, layers[-1], lam, c, mode == EquilibriumMode.STEPPED))

    c_list = [layer.c for layer in layers[1:]]
    b_list = [layer.b for layer in layers[1:]]
    eq = Equilibrium(
        mode=mode,
        layers=layers,
        pressures=pressures(c_list, b_list, p_boundary=p_boundary),
        p_boundary=p_boundary,
        major_radius=seed.major_radius,
    )
    eq.residuals = _layer_residuals(eq)
    verify(eq)
    logger.info(
        f"[Equilibria] {mode.value} equilibrium with {len(layers)} layers, "
        f"pressures {[f'{p:.6e}' for p in eq.pressures]}"
    )
    return eq


def build_stepped(
    seed: Seed,
    lambdas: Sequence[float],
    jumps: Sequence[float],
    p_boundary: Optional[float] = None,
) -> Equilibrium:
    """
    Stepped-pressure equilibrium with one layer per Beltrami factor.

    Args:
        seed: Core torus and field; lambdas[0] must be its factor
        lambdas: λ_1..λ_N, consecutive values distinct
        jumps: c_2..c_N in physical units of the layer below
        p_boundary: Outermost pressure (default from config)

    Raises:
        ConfigError: On mismatched lists or repeated factors
        ForbiddenEigenvalue: If a factor is too close to the twist-annihilating value
        ResidualAboveTolerance: If a finished interface fails its check
    """
    return _build_layers(seed, lambdas, jumps, EquilibriumMode.STEPPED, p_boundary)


def build_force_free(
    seed: Seed, lambdas: Sequence[float], p_boundary: Optional[float] = None
) -> Equilibrium:
    """
    Layers with zero jumps, so the field is continuous and only λ changes.

    The interface datum is the lower field itself and no interface solve runs.
    """
    jumps = [0.0] * (len(lambdas) - 1)
    return _build_layers(seed, lambdas, jumps, EquilibriumMode.FORCE_FREE, p_boundary)


def build_free_boundary(seed: Seed, p_boundary: Optional[float] = None) -> Equilibrium:
    """
    Plasma region bounded by the seed torus plus a harmonic vacuum shell.

    The vacuum field h solves curl h = 0, div h = 0 with h = B on the seed
    torus. An invariant torus of h outside the seed closes the shell, and
    J = h × N′ on it is the surface current that confines h.

    Raises:
        TypeIIDegenerate: If the type-II value of the seed is below the floor
    """
    settings = SolverConfig.equilibria()
    p_boundary = settings.boundary_pressure if p_boundary is None else p_boundary
    if not abs(seed.type_II) > settings.type2_floor:
        raise TypeIIDegenerate(seed.type_II, settings.type2_floor)
    _check_det(seed.type_I)

    K, omega = seed.K, seed.omega
    stage = "extension"
    try:
        jet = extend_jet(
            K, TorusVec.constant(omega, K.grid), 0.0, order=settings.order, one_sided=False
        )
        vacuum = JetAmbientField(jet)

        stage = "twist"
        _, twist = twist_data(K, omega, vacuum)
        _check_twist(twist)

        stage = "continuation"
        certificate = _target_certificate(seed, omega)
        kam_state, target = outward_torus(K, omega, twist, vacuum, jet, certificate)
    except (PyBeltramiError, ValueError) as e:
        logger.error(f"[Equilibria] vacuum shell failed at stage {stage}: {e}")
        raise

    outer = kam_state.K
    shell = Layer(
        index=2,
        inner=K,
        outer=outer,
        lam=0.0,
        field=vacuum,
        jet=jet,
        omega=kam_state.frequency(target),
        inner_omega=omega,
        twist=twist,
        det_M=float("nan"),
        kam=kam_state,
    )
    eq = Equilibrium(
        mode=EquilibriumMode.FREE_BOUNDARY,
        layers=[_core_layer(seed), shell],
        pressures=[p_boundary, p_boundary],
        p_boundary=p_boundary,
        major_radius=seed.major_radius,
    )
    eq.sheet = free_boundary_sheet(shell)
    eq.residuals = _layer_residuals(eq)
    h_values = K.field_values(vacuum)
    b_values = K.field_values(seed.field)
    eq.residuals["boundary_norm"] = float(
        np.max(np.abs(dot(h_values, h_values) - dot(b_values, b_values)))
    )
    eq.residuals["sheet_divergence"] = surface_divergence(outer, eq.sheet).sup_norm()
    eq.residuals["sheet_tangency"] = _normal_part(outer, eq.sheet)
    verify(eq)
    logger.info(
        f"[Equilibria] free boundary: vacuum twist {twist:.6e}, "
        f"sheet max {float(np.max(np.linalg.norm(eq.sheet, axis=0))):.3e}"
    )
    return eq


# Currents


def unit_normal(K: Embedding) -> np.ndarray:
    """Outward unit normal on the grid of K."""
    return K.orientation * K.n_values / np.sqrt(K.n_sq_values)


def _normal_part(K: Embedding, current: np.ndarray) -> float:
    return float(np.max(np.abs(dot(current, unit_normal(K)))))


def free_boundary_sheet(shell: Layer) -> np.ndarray:
    """J = h × N′ on the outer boundary of the vacuum shell, shape (3, N₁, N₂)."""
    return cross(shell.physical_values(shell.outer), unit_normal(shell.outer))


@dataclass(frozen=True)
class SheetCurrent:
    """Surface current (B_k − B_{k+1}) × N_k on interface k."""

    interface: int
    torus: Embedding
    values: np.ndarray
    normal_part: float
    divergence: float

    @property
    def magnitude(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=0)))


def current_distribution(eq: Equilibrium) -> tuple[list[dict[str, float]], list[SheetCurrent]]:
    """
    Volume and surface parts of the current of an equilibrium.

    Returns:
        (volumetric, sheets) where volumetric lists λ_k and the field scale per
        layer and sheets lists one current per interface, plus the boundary
        current of a free-boundary equilibrium
    """
    volumetric = [
        {"layer": layer.index, "lambda": layer.lam, "scale": layer.scale} for layer in eq.layers
    ]
    sheets = []
    for k, (lower, upper) in enumerate(eq.interfaces(), start=1):
        if eq.mode == EquilibriumMode.FREE_BOUNDARY:
            continue
        K, x_lower, x_upper = _interface_values(lower, upper)
        values = cross(lower.scale * x_lower - upper.scale * x_upper, unit_normal(K))
        sheets.append(
            SheetCurrent(
                interface=k,
                torus=K,
                values=values,
                normal_part=_normal_part(K, values),
                divergence=surface_divergence(K, values).sup_norm(),
            )
        )
    if eq.sheet is not None:
        K = eq.layers[-1].outer
        sheets.append(
            SheetCurrent(
                interface=len(eq.layers),
                torus=K,
                values=eq.sheet,
                normal_part=_normal_part(K, eq.sheet),
                divergence=surface_divergence(K, eq.sheet).sup_norm(),
            )
        )
    return volumetric, sheets


def total_pressure_jump(eq: Equilibrium, k: int) -> float:
    """
    max |(p_{k+1} + ½|B_{k+1}|²) − (p_k + ½|B_k|²)| on interface k (1-based).

    Vanishes for a weak solution.
    """
    if not 1 <= k < len(eq.layers):
        raise ValueError(f"interface {k} out of range 1..{len(eq.layers) - 1}")
    lower, upper = eq.layers[k - 1], eq.layers[k]
    _, x_lower, x_upper = _interface_values(lower, upper)
    inside = eq.pressures[k - 1] + 0.5 * lower.scale**2 * dot(x_lower, x_lower)
    outside = eq.pressures[k] + 0.5 * upper.scale**2 * dot(x_upper, x_upper)
    return float(np.max(np.abs(outside - inside)))


def force_free_factor(eq: Equilibrium) -> np.ndarray:
    """Regionwise values of the factor f with curl B = fB."""
    return np.array(eq.lambdas, dtype=float)


# Reporting


def summary_table(eq: Equilibrium) -> str:
    """Human-readable table of the layer constants and residuals."""
    header = (
        f"{'layer':>5} {'lambda':>12} {'c':>12} {'b':>13} {'p':>14} "
        f"{'twist':>13} {'det M':>13}"
    )
    lines = [f"{eq.mode.value} equilibrium, {len(eq.layers)} layers", header]
    for layer, p in zip(eq.layers, eq.pressures):
        lines.append(
            f"{layer.index:>5} {layer.lam:>12.6g} {layer.c:>12.4e} {layer.b:>13.5e} "
            f"{p:>14.8e} {layer.twist:>13.5e} {layer.det_M:>13.5e}"
        )
    lines.append("")
    lines.append("residuals")
    for name in sorted(eq.residuals):
        lines.append(f"  {name:<24} {eq.residuals[name]:.3e}")
    return "\n".join(lines) + "\n"


def write_bundle(eq: Equilibrium, out_dir: Path, manifest: Optional[dict[str, Any]] = None) -> Path:
    """
    Write an equilibrium bundle.

    Layout: ``layer_<k>/`` with jet coefficients per order and both boundary
    tori, ``sheets/`` with surface currents, convergence logs, ``summary.txt``
    and ``manifest.json``.

    Returns:
        Path of the manifest
    """
    out_dir = Path(out_dir)
    for layer in eq.layers:
        folder = out_dir / f"layer_{layer.index}"
        meta = {"layer": layer.index, "lambda": layer.lam}
        write_array(folder / "outer_torus", layer.outer.K, meta)
        if layer.inner is not None:
            write_array(folder / "inner_torus", layer.inner.K, meta)
        if layer.jet is not None:
            for j, coeff in enumerate(layer.jet.coeffs):
                lo, hi = layer.jet.t_range
                jet_meta = dict(meta, order=j, t_min=lo, t_max=hi)
                write_array(folder / f"jet_order_{j}", coeff, jet_meta)
        if layer.kam is not None:
            write_convergence(folder / "convergence.csv", layer.kam.history)

    _, sheets = current_distribution(eq)
    for sheet in sheets:
        write_array(
            out_dir / "sheets" / f"sheet_{sheet.interface}",
            TorusVec.from_values(sheet.values),
            {"interface": sheet.interface, "magnitude": sheet.magnitude},
        )

    (out_dir / "summary.txt").write_text(summary_table(eq))
    record = dict(manifest or {})
    record.setdefault("residuals", {}).update(eq.residuals)
    record.setdefault("scalars", {}).update(eq.scalars())
    return write_manifest(out_dir, record)
