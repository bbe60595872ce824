"""Newton iteration for Diophantine invariant tori of divergence-free fields.

Each step solves the linearized invariance equation in the adapted frame
(DK, n/|n|²). The normal component ξ₂ and the tangential component ξ₁ come
from two cohomological equations; the mean of ξ₂ and the frequency scale
correction come from a 2x2 average system whose determinant is the twist
constant. The frequency is only ever rescaled, ω = Λ·ω₀.
"""

import asyncio
import logging
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .config import SolverConfig
from .exceptions import (
    DivergenceDetected,
    GridResolutionError,
    MaxIterExceeded,
    NotDiophantineUpToCutoff,
    ResidualAboveTolerance,
    TwistTooSmall,
)
from .smalldiv import Frequency2, certify, min_grid_divisor, solve_cohomological
from .spectral import TorusScalar, TorusVec
from .torus_geom import (
    Embedding,
    cross,
    dot,
    frame_compose,
    invariance_error,
    normal_separation,
    twist_data,
    twist_matrix,
)

if TYPE_CHECKING:
    from .fields.base import AmbientField

logger = logging.getLogger(__name__)


@dataclass
class KamState:
    """
    Current iterate of the Newton scheme.

    Attributes:
        K: Current embedding
        scale: Cumulative frequency scale Λ (frequency is Λ·ω₀)
        err: Sup norm of the invariance error
        twist: Twist constant of the current iterate
        iteration: Number of completed steps
        history: Rows (iteration, err, Λ, twist, min_divisor)
        verified_err: Invariance error re-checked on a doubled grid
        stalled: True when the iteration stopped at the field's error floor
    """

    K: Embedding
    scale: float = 1.0
    err: float = float("inf")
    twist: float = float("nan")
    iteration: int = 0
    history: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    verified_err: Optional[float] = None
    stalled: bool = False

    def frequency(self, omega0) -> np.ndarray:
        return self.scale * np.asarray(getattr(omega0, "omega", omega0), dtype=float)

    @property
    def initial_err(self) -> float:
        return self.history[0][1] if self.history else self.err

    @property
    def closeness(self) -> float:
        """Observed |Λ − 1| / initial error."""
        e0 = self.initial_err
        return abs(self.scale - 1.0) / e0 if e0 > 0 else 0.0


@dataclass(frozen=True)
class Correction:
    """
    One linearized solve, kept for diagnostics.

    Grid arrays: xi1 (2, N₁, N₂), xi2 (N₁, N₂), delta (3, N₁, N₂), A and A_prime
    (2, N₁, N₂), b (N₁, N₂), error (3, N₁, N₂).
    """

    xi1: np.ndarray
    xi2: np.ndarray
    lam: float
    delta: np.ndarray
    A: np.ndarray
    A_prime: np.ndarray
    b: np.ndarray
    error: np.ndarray
    twist: float
    condition: float
    min_divisor: float
    mean_defect: float


def newton_correction(K: Embedding, omega, field: "AmbientField") -> Correction:
    """
    Solve the linearized invariance equation L_ωΔ − DB·Δ + λ·DKω = −E.

    Args:
        K: Current embedding
        omega: Current frequency Λω₀ (vector or Frequency2)
        field: Divergence-free ambient field

    Raises:
        TwistTooSmall: If the 2x2 average system is singular
        DivisorUnderflow: From the cohomological solves
    """
    settings = SolverConfig.kam()
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    grid = K.grid

    E = invariance_error(K, w, field).values()
    err = float(np.max(np.abs(E)))
    A = twist_matrix(K, field)
    T = float(A[0].mean() * w[1] - A[1].mean() * w[0])
    if abs(T) <= settings.twist_floor:
        raise TwistTooSmall(T, settings.twist_floor)

    n_E = dot(K.n_values, E)
    mean_defect = float(np.mean(n_E))
    if err > 0 and abs(mean_defect) > settings.solvability_tol * err:
        logger.warning(f"[KAM] solvability average [nE]={mean_defect:.3e} removed (err={err:.3e})")
    xi2_osc = solve_cohomological(TorusScalar.from_values(-(n_E - mean_defect)), w).values()

    t_E = K.tangential(E)
    system = np.array([[A[0].mean(), w[0]], [A[1].mean(), w[1]]])
    rhs = -(np.mean(A * xi2_osc, axis=(-2, -1)) + t_E.mean(axis=(-2, -1)))
    xi2_mean, lam = np.linalg.solve(system, rhs)
    xi2 = xi2_osc + xi2_mean

    tangential_rhs = -t_E - lam * w[:, None, None] - A * xi2
    rhs_field = TorusVec.from_values(tangential_rhs)
    rhs_field = rhs_field - rhs_field.mean()
    xi1 = solve_cohomological(rhs_field, w).values()

    delta = frame_compose(K, xi1, xi2)

    dE = TorusVec.from_values(E).gradient().values()
    dk = K.dk_values
    transport = cross(dE[:, 0], dk[:, 1]) + cross(dk[:, 0], dE[:, 1])
    A_prime = K.tangential(transport) / K.n_sq_values
    b = -dot(transport, K.n_values) / K.n_sq_values

    return Correction(
        xi1=xi1,
        xi2=xi2,
        lam=float(lam),
        delta=delta,
        A=A,
        A_prime=A_prime,
        b=b,
        error=E,
        twist=T,
        condition=float(np.linalg.cond(system)),
        min_divisor=min_grid_divisor(grid, w),
        mean_defect=mean_defect,
    )


def linearized_defect(K: Embedding, omega, field: "AmbientField", corr: Correction) -> np.ndarray:
    """
    R(Δ) + E + λDKω − (DK·E₁ + (n/|n|²)·E₂) on the grid.

    R(Δ) = L_ωΔ − DB·Δ is the linearized invariance operator and
    E₁ = G⁻¹DKᵀDE·ξ₁ + A′ξ₂, E₂ = nᵀDE·ξ₁ + bξ₂ are the quadratic error terms.
    Only the removed solvability average [nᵀE] survives, along the normal.
    """
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    delta = TorusVec.from_values(corr.delta)
    jb = K.jacobian_values(field)
    R = delta.l_omega(w).values() - np.einsum("ijxy,jxy->ixy", jb, corr.delta)
    dE = TorusVec.from_values(corr.error).gradient().values()
    dE_xi1 = np.einsum("iaxy,axy->ixy", dE, corr.xi1)
    E1 = K.tangential(dE_xi1) + corr.A_prime * corr.xi2
    E2 = dot(K.n_values, dE_xi1) + corr.b * corr.xi2
    frequency_shift = corr.lam * K.push(np.broadcast_to(w[:, None, None], corr.xi1.shape))
    quadratic = K.push(E1) + K.n_values * (E2 / K.n_sq_values)
    return R + corr.error + frequency_shift - quadratic


def newton_step(
    state: KamState, field: "AmbientField", omega0, floor: Optional[float] = None
) -> KamState:
    """
    One Newton step: returns the corrected state.

    Args:
        floor: Error level below which growth is not divergence (default: the
            roundoff floor)

    Raises:
        TwistTooSmall, DivisorUnderflow: From the linearized solve
        DivergenceDetected: If the error grew while above the floor
    """
    settings = SolverConfig.kam()
    floor = settings.roundoff_floor if floor is None else max(floor, settings.roundoff_floor)
    w = state.frequency(omega0)
    corr = newton_correction(state.K, w, field)
    K_new = state.K.displaced(corr.delta)
    scale = state.scale * (1.0 + corr.lam)
    w_new = scale * np.asarray(getattr(omega0, "omega", omega0), dtype=float)
    err = invariance_error(K_new, w_new, field).sup_norm()

    iteration = state.iteration + 1
    logger.info(
        f"[KAM] iter {iteration}: err={err:.3e} scale={scale:.15f} twist={corr.twist:.6e} "
        f"cond={corr.condition:.2e}"
    )
    if state.iteration >= 1 and err > state.err and state.err > floor:
        raise DivergenceDetected(iteration, state.err, err)

    history = state.history + [(iteration, err, scale, corr.twist, corr.min_divisor)]
    return KamState(
        K=K_new, scale=scale, err=err, twist=corr.twist, iteration=iteration, history=history
    )


def _check_resolution(state: KamState, refinements: int) -> tuple[KamState, int]:
    settings = SolverConfig.kam()
    threshold = SolverConfig.spectral().tail_threshold
    tail = state.K.K.tail_ratio()
    if tail <= threshold:
        return state, refinements
    if refinements >= settings.max_refinements:
        raise GridResolutionError(tail, state.K.grid)
    n1, n2 = state.K.grid
    logger.warning(f"[KAM] coefficient tail {tail:.2e} above {threshold:.0e}; doubling grid")
    return replace(state, K=state.K.resize((2 * n1, 2 * n2))), refinements + 1


def check_doubled_grid(state: KamState, omega0, field: "AmbientField", tol: float) -> float:
    """
    Re-evaluate the invariance error of state on a grid twice as fine.

    Returns:
        The doubled-grid error, also stored as state.verified_err

    Raises:
        ResidualAboveTolerance: If it exceeds 10·max(tol, err, roundoff floor)
    """
    w0 = np.asarray(getattr(omega0, "omega", omega0), dtype=float)
    n1, n2 = state.K.grid
    state.verified_err = invariance_error(
        state.K.resize((2 * n1, 2 * n2)), state.scale * w0, field
    ).sup_norm()
    limit = 10 * max(tol, state.err, SolverConfig.kam().roundoff_floor)
    if not state.verified_err <= limit:
        logger.error(f"[KAM] doubled-grid check err={state.verified_err:.3e} above {limit:.1e}")
        raise ResidualAboveTolerance("doubled_grid", state.verified_err, limit)
    return state.verified_err


def run_newton(
    K0: Embedding,
    omega0,
    field: "AmbientField",
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    floor: Optional[float] = None,
) -> KamState:
    """
    Iterate Newton steps until the invariance error is below tol.

    When a floor is given, an error that grows after reaching the floor
    ends the iteration at the previous iterate, marked as stalled. The field
    itself cannot support a smaller error there.

    Args:
        K0: Initial embedding
        omega0: Target frequency direction (vector or Frequency2)
        field: Divergence-free ambient field
        tol: Invariance tolerance (default from config)
        max_iter: Iteration budget (default from config)
        floor: Accuracy floor of the field (default: none beyond roundoff)

    Returns:
        Converged state, checked on a doubled grid

    Raises:
        MaxIterExceeded: If the budget runs out
        GridResolutionError: If the embedding stays unresolved after refinement
        ResidualAboveTolerance: If the doubled-grid check fails
    """
    settings = SolverConfig.kam()
    tol = settings.tol if tol is None else tol
    max_iter = settings.max_iter if max_iter is None else max_iter

    w0 = np.asarray(getattr(omega0, "omega", omega0), dtype=float)
    err0 = invariance_error(K0, w0, field).sup_norm()
    state = KamState(K=K0, scale=1.0, err=err0, iteration=0)
    state.history.append((0, err0, 1.0, float("nan"), min_grid_divisor(K0.grid, w0)))
    logger.info(f"[KAM] start: err={err0:.3e} on grid {K0.grid[0]}x{K0.grid[1]}")

    refinements = 0
    while state.err >= tol:
        if state.iteration >= max_iter:
            raise MaxIterExceeded(max_iter, state.err)
        state, refinements = _check_resolution(state, refinements)
        previous = state
        state = newton_step(state, field, w0, floor=floor)
        if floor is not None and state.err > previous.err and previous.err <= floor:
            logger.warning(
                f"[KAM] error stalled at {previous.err:.3e} (floor {floor:.1e}); "
                f"keeping iterate {previous.iteration}"
            )
            state = replace(previous, stalled=True)
            break

    check_doubled_grid(state, w0, field, tol)
    logger.info(
        f"[KAM] converged in {state.iteration} iterations: err={state.err:.3e} "
        f"|scale-1|={abs(state.scale - 1):.3e}"
    )
    return state


def convergence_order(history: Sequence[tuple], floor: Optional[float] = None) -> float:
    """
    Fitted exponent p of e_{n+1} ≈ C e_nᵖ over the iterates above the roundoff floor.

    Returns NaN when fewer than two usable pairs exist.
    """
    floor = 1e3 * SolverConfig.kam().roundoff_floor if floor is None else floor
    errs = [row[1] for row in history]
    pairs = [(a, b) for a, b in zip(errs, errs[1:]) if a > floor and b > floor]
    if len(pairs) < 2:
        return float("nan")
    x = np.log([a for a, _ in pairs])
    y = np.log([b for _, b in pairs])
    return float(np.polyfit(x, y, 1)[0])


# Families of tori


@dataclass
class FamilyMember:
    """Outcome of one continuation target."""

    target: Frequency2
    state: Optional[KamState] = None
    error: Optional[BaseException] = None
    side: int = 0
    predicted_side: int = 0
    separation: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.state is not None


def _predicted_side(K0: Embedding, omega0: np.ndarray, twist: float, target: np.ndarray) -> int:
    """+1 when the torus for the target lies outside K0, from the sign of Δρ·T."""
    delta_ratio = target[1] / target[0] - omega0[1] / omega0[0]
    if delta_ratio == 0 or twist == 0:
        return 0
    normal_side = 1 if delta_ratio * twist > 0 else -1
    return normal_side * K0.orientation


def _observed_side(K0: Embedding, K: Embedding) -> int:
    diff = K.enclosed_volume - K0.enclosed_volume
    if abs(diff) <= 1e-12 * abs(K0.enclosed_volume):
        return 0
    return 1 if diff * K0.orientation > 0 else -1


def _record_separations(members: list[FamilyMember]) -> None:
    floor = SolverConfig.kam().separation_floor
    converged = [m for m in members if m.ok]
    for member in converged:
        gaps = [
            normal_separation(member.state.K, other.state.K)
            for other in converged
            if other is not member and other.target.ratio != member.target.ratio
        ]
        if not gaps:
            continue
        member.separation = min(gaps)
        if member.separation <= floor:
            logger.warning(
                f"[KAM] target ratio {member.target.ratio:.12g} is within "
                f"{member.separation:.3e} of another family member"
            )


def _continue_one(K0, omega0, field, target, tol, max_iter, floor) -> KamState:
    return run_newton(K0, target, field, tol=tol, max_iter=max_iter, floor=floor)


async def continue_family_async(
    K0: Embedding,
    omega0,
    field: "AmbientField",
    targets: Sequence[Frequency2],
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    workers: Optional[int] = None,
    floor: Optional[float] = None,
) -> list[FamilyMember]:
    """
    Converge one torus per target frequency, starting every run from K0.

    Runs execute in worker threads; failures are reported per target. Each
    converged member records its smallest normal gap to the others, which is
    negative when two members cross.
    """
    workers = SolverConfig.kam().workers if workers is None else workers
    w0 = np.asarray(getattr(omega0, "omega", omega0), dtype=float)
    _, twist = twist_data(K0, w0, field)
    gate = asyncio.Semaphore(max(1, workers))

    async def run(target: Frequency2) -> KamState:
        async with gate:
            return await asyncio.to_thread(
                _continue_one, K0, w0, field, target, tol, max_iter, floor
            )

    outcomes = await asyncio.gather(*(run(t) for t in targets), return_exceptions=True)

    members = []
    for target, outcome in zip(targets, outcomes):
        predicted = _predicted_side(K0, w0, twist, target.omega)
        if isinstance(outcome, BaseException):
            logger.error(f"[KAM] target ratio {target.ratio:.12g} failed: {outcome}")
            members.append(FamilyMember(target=target, error=outcome, predicted_side=predicted))
            continue
        side = _observed_side(K0, outcome.K)
        if predicted and side and side != predicted:
            logger.warning(f"[KAM] target ratio {target.ratio:.12g} landed on unexpected side")
        members.append(
            FamilyMember(target=target, state=outcome, side=side, predicted_side=predicted)
        )

    _record_separations(members)
    return members


def continue_family(
    K0: Embedding,
    omega0,
    field: "AmbientField",
    targets: Sequence[Frequency2],
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    workers: Optional[int] = None,
    floor: Optional[float] = None,
) -> list[FamilyMember]:
    """Synchronous wrapper around :func:`continue_family_async`."""
    return asyncio.run(
        continue_family_async(
            K0, omega0, field, targets, tol=tol, max_iter=max_iter, workers=workers, floor=floor
        )
    )


def family_target(
    state: KamState,
    omega0,
    distance: float,
    side: int,
    gamma: float,
    tau: float,
    k_max: int,
    attempts: Optional[int] = None,
) -> Frequency2:
    """
    Certified target frequency for a torus about `distance` away from state.K.

    The ratio offset follows from the twist, Δρ = side·d·T·[|n|]/ω₁², where
    side = +1 is the direction of n. When the predicted ratio fails
    certification, the offset is nudged by a few percent and retried.

    Raises:
        NotDiophantineUpToCutoff: If no nudged ratio certifies
    """
    attempts = SolverConfig.equilibria().target_attempts if attempts is None else attempts
    w = state.frequency(omega0)
    offset = side * distance * state.twist * state.K.mean_normal_length / w[0] ** 2
    ratio = w[1] / w[0]
    last_error: Optional[NotDiophantineUpToCutoff] = None
    for attempt in range(attempts):
        bump = (attempt + 1) // 2 * (1 if attempt % 2 else -1)
        candidate = ratio + offset * (1 + 0.05 * bump)
        try:
            target = certify((w[0], w[0] * candidate), gamma, tau, k_max)
        except NotDiophantineUpToCutoff as e:
            last_error = e
            logger.debug(f"[KAM] target ratio {candidate:.12g} not certified: {e}")
            continue
        logger.info(f"[KAM] family target ratio {candidate:.12g} (offset {offset:.3e})")
        return target
    raise last_error if last_error else NotDiophantineUpToCutoff(None, "no target attempts")
