"""Hamilton–Jacobi interface solver.

Given a metric G on T², a linear field Y with frequency ω (so Y = ω in the
coordinates, with closed dual form Gω) and a small jump constant c, find
H, a and b so that

    X = (1+c)^{1/2} Y + ∇H + a·∇φ

has |X|² = (1+b)|Y|² + c, together with a near-identity map id + v that
conjugates X to the linear field (1+c)^{1/2}ω. Covectors (∂H, a) are turned
into vectors with G⁻¹. The datum is assumed normalized, [|Y|²] = 1.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .config import SolverConfig
from .exceptions import ConfigError, MFloorViolated, NoConvergence
from .smalldiv import solve_cohomological, solve_with_free_mean
from .spectral import (
    TorusMat,
    TorusScalar,
    TorusVec,
    compose_shift,
    invert_shift,
)
from .torus_geom import inverse_2x2

logger = logging.getLogger(__name__)

_NORMALIZATION_TOL = 1e-12


def _omega(omega) -> np.ndarray:
    return np.asarray(getattr(omega, "omega", omega), dtype=float)


def norm_sq_Y(G: TorusMat, omega) -> np.ndarray:
    """Grid values of |Y|² = ωᵀGω."""
    w = _omega(omega)
    return np.einsum("a,abxy,b->xy", w, G.values(), w)


def covector_Y(G: TorusMat, omega) -> np.ndarray:
    """Grid values of the dual form Y♭ = Gω, shape (2, N₁, N₂)."""
    return np.einsum("abxy,b->axy", G.values(), _omega(omega))


def normalize_datum(G: TorusMat, omega) -> tuple[float, np.ndarray]:
    """
    Scale σ with [|σY|²] = 1.

    A jump constant c computed for σY corresponds to κc = c/σ² for Y.

    Returns:
        (σ, σω)
    """
    kappa = float(np.mean(norm_sq_Y(G, omega)))
    if kappa <= 0:
        raise ValueError("boundary datum has zero mean square")
    sigma = 1.0 / np.sqrt(kappa)
    return sigma, sigma * _omega(omega)


def physical_jump(c_normalized: float, sigma: float) -> float:
    return c_normalized / sigma**2


def normalized_jump(c_physical: float, sigma: float) -> float:
    return c_physical * sigma**2


@dataclass(frozen=True)
class BetaLedger:
    """
    Mean-fixing constants of one Newton step.

    β = β₀ + Σᵢ(β₁⁽ⁱ⁾ + β₂⁽ⁱ⁾ + β₃⁽ⁱ⁾)αᵢ; ``beta`` is computed directly from
    the combined right-hand side, so the identity is a check.
    """

    beta0: float = 0.0
    beta1: tuple[float, float] = (0.0, 0.0)
    beta2: tuple[float, float] = (0.0, 0.0)
    beta3: tuple[float, float] = (0.0, 0.0)
    alpha: tuple[float, float] = (0.0, 0.0)
    beta: float = 0.0
    det_M: float = float("nan")

    def reconstructed(self) -> float:
        return self.beta0 + sum(
            (self.beta1[i] + self.beta2[i] + self.beta3[i]) * self.alpha[i] for i in range(2)
        )


@dataclass
class HjState:
    """
    Iterate of the Hamilton–Jacobi Newton scheme.

    Attributes:
        H: Zero-mean potential
        v: Zero-mean conjugacy displacement
        a: Constant covector
        b: Norm rescaling constant (may be negative)
        c: Jump constant (normalized units)
        ledger: β constants of the last step
        iteration: Completed steps
        history: Residual ‖T_c‖∞ + ‖R_c‖∞ per iterate
    """

    H: TorusScalar
    v: TorusVec
    a: np.ndarray
    b: float
    c: float
    ledger: BetaLedger = field(default_factory=BetaLedger)
    iteration: int = 0
    history: list[float] = field(default_factory=list)

    @classmethod
    def initial(cls, c: float, grid: tuple[int, int]) -> "HjState":
        return cls(
            H=TorusScalar.zeros(grid),
            v=TorusVec.zeros(grid, (2,)),
            a=np.zeros(2),
            b=0.0,
            c=float(c),
        )

    @property
    def speed(self) -> float:
        """(1 + c)^{1/2}."""
        return float(np.sqrt(1.0 + self.c))

    def covector(self, G: TorusMat, omega) -> np.ndarray:
        """Grid values of X♭ = sGω + ∂H + a."""
        return (
            self.speed * covector_Y(G, omega)
            + self.H.gradient().values()
            + self.a[:, None, None]
        )

    def X(self, G: TorusMat, omega) -> TorusVec:
        """The solution field sω + G⁻¹(∂H + a)."""
        linear = self.speed * _omega(omega)[:, None, None]
        return TorusVec.from_values(_gradient_part(self.H, self.a, G) + linear)


def _gradient_part(H: TorusScalar, a: np.ndarray, G: TorusMat) -> np.ndarray:
    """G⁻¹(∂H + a) on the grid."""
    g_inv, _ = inverse_2x2(G.values())
    cov = H.gradient().values() + np.asarray(a, dtype=float)[:, None, None]
    return np.einsum("abxy,bxy->axy", g_inv, cov)


def eval_Tc_and_b(H: TorusScalar, a, c: float, G: TorusMat, omega) -> tuple[TorusScalar, float]:
    """
    Residual T_c(H, a) and the constant b that makes its mean vanish.

    T_c = 2sL_ωH + |∂H|² + 2∂H·G⁻¹a + f − b|Y|² − c(1 − |Y|²) with
    f = aᵀG⁻¹a + 2s a·ω and norms taken with G⁻¹.
    """
    w = _omega(omega)
    a = np.asarray(a, dtype=float)
    s = np.sqrt(1.0 + c)
    g_inv, _ = inverse_2x2(G.values())
    dH = H.gradient().values()
    y_sq = norm_sq_Y(G, w)

    transport = 2 * s * H.l_omega(w).values()
    quad = np.einsum("axy,abxy,bxy->xy", dH, g_inv, dH)
    mixed = 2 * np.einsum("axy,abxy,b->xy", dH, g_inv, a)
    f = np.einsum("a,abxy,b->xy", a, g_inv, a) + 2 * s * float(a @ w)
    rest = transport + quad + mixed + f
    b = float(np.mean(rest) - c * np.mean(1.0 - y_sq)) / float(np.mean(y_sq))
    return TorusScalar.from_values(rest - b * y_sq - c * (1.0 - y_sq)), b


def eval_Tc(H: TorusScalar, a, c: float, G: TorusMat, omega) -> TorusScalar:
    """Norm residual T_c(H, a), with b chosen so that its mean vanishes."""
    return eval_Tc_and_b(H, a, c, G, omega)[0]


def eval_Rc(H: TorusScalar, v: TorusVec, a, c: float, G: TorusMat, omega) -> TorusVec:
    """
    Conjugacy residual R_c = sL_ωv − (G⁻¹(∂H + a))∘(id + v).

    Raises:
        NotDiffeomorphism: If id + v folds
    """
    w = _omega(omega)
    s = np.sqrt(1.0 + c)
    drift = TorusVec.from_values(_gradient_part(H, np.asarray(a, dtype=float), G))
    return v.l_omega(w) * s - compose_shift(drift, v)


def residual(state: HjState, G: TorusMat, omega) -> tuple[float, float]:
    """(‖T_c‖∞, ‖R_c‖∞) of a state."""
    t_c = eval_Tc(state.H, state.a, state.c, G, omega)
    r_c = eval_Rc(state.H, state.v, state.a, state.c, G, omega)
    return t_c.sup_norm(), r_c.sup_norm()


def hj_newton_step(state: HjState, G: TorusMat, omega) -> HjState:
    """
    One Newton step on (H, v, a).

    The norm equation is pulled back by Φ₀ = id + v₀ so that it becomes a
    constant-coefficient cohomological equation; the conjugacy equation uses
    the substitution η = (I + Dv₀)η̃. The constant a is fixed by the averaged
    system whose matrix is [(I + Dv₀)⁻¹M∘Φ₀].

    Raises:
        MFloorViolated: If the averaged matrix is numerically singular
        DivisorUnderflow, DegenerateWeight: From the cohomological solves
    """
    settings = SolverConfig.hj()
    w = _omega(omega)
    grid = state.H.grid
    s = state.speed
    v0 = state.v

    E_H, _ = eval_Tc_and_b(state.H, state.a, state.c, G, w)
    E_v = eval_Rc(state.H, v0, state.a, state.c, G, w).values()

    g_inv, _ = inverse_2x2(G.values())
    grad_H = np.einsum("abxy,bxy->axy", g_inv, state.H.gradient().values())
    grad_a = np.einsum("abxy,b->axy", g_inv, state.a)

    pulled_E = compose_shift(E_H, v0)
    pulled_Y = compose_shift(TorusScalar.from_values(norm_sq_Y(G, w)), v0)
    pulled_H = compose_shift(TorusVec.from_values(grad_H), v0)
    pulled_a = compose_shift(TorusVec.from_values(grad_a), v0)
    pulled_G = compose_shift(G, v0).values()
    pulled_G_inv, _ = inverse_2x2(pulled_G)

    weight = pulled_Y * (-0.5 / s)
    xi_E, beta0 = solve_with_free_mean(pulled_E * (-0.5 / s), weight, w)
    zeta, beta1, beta2, beta3 = [], [], [], []
    for i in range(2):
        u_H, b1 = solve_with_free_mean(pulled_H.component(i) * (-1.0 / s), weight, w)
        u_a, b2 = solve_with_free_mean(pulled_a.component(i) * (-1.0 / s), weight, w)
        u_w, b3 = solve_with_free_mean(TorusScalar.constant(-w[i], grid), weight, w)
        zeta.append(u_H + u_a + u_w)
        beta1.append(b1)
        beta2.append(b2)
        beta3.append(b3)

    dv = v0.gradient().values()
    shift = np.eye(2)[:, :, None, None] + dv
    shift_inv, _ = inverse_2x2(shift)
    shift_inv_t = np.swapaxes(shift_inv, 0, 1)

    columns = []
    for i in range(2):
        e_i = np.zeros((2, 1, 1))
        e_i[i] = 1.0
        inner = e_i + np.einsum("abxy,bxy->axy", shift_inv_t, zeta[i].gradient().values())
        columns.append(np.einsum("abxy,bxy->axy", pulled_G_inv, inner))
    M = np.stack(columns, axis=1)  # M[:, i] is column i
    Q = np.einsum("abxy,bcxy->acxy", shift_inv, M)
    Q_mean = Q.mean(axis=(-2, -1))
    det = float(np.linalg.det(Q_mean))
    if abs(det) < settings.matrix_floor:
        raise MFloorViolated(det, settings.matrix_floor)

    d_xi_E = np.einsum("abxy,bxy->axy", shift_inv_t, xi_E.gradient().values())
    source = E_v - np.einsum("abxy,bxy->axy", pulled_G_inv, d_xi_E)
    rhs = np.einsum("abxy,bxy->axy", shift_inv, source).mean(axis=(-2, -1))
    alpha = np.linalg.solve(Q_mean, rhs)

    xi_hat = xi_E + zeta[0] * alpha[0] + zeta[1] * alpha[1]
    d_xi_hat = np.einsum("abxy,bxy->axy", shift_inv_t, xi_hat.gradient().values())
    inner = np.einsum("abxy,bxy->axy", pulled_G_inv, alpha[:, None, None] + d_xi_hat) - E_v
    eta_rhs = TorusVec.from_values(np.einsum("abxy,bxy->axy", shift_inv, inner) / s)
    eta_rhs = eta_rhs - eta_rhs.mean()
    eta_tilde = solve_cohomological(eta_rhs, w).values()
    eta = np.einsum("abxy,bxy->axy", shift, eta_tilde)

    f_total = (
        pulled_E * (-0.5 / s)
        + sum((pulled_H.component(i) + pulled_a.component(i)) * (-alpha[i] / s) for i in range(2))
        - float(alpha @ w)
    )
    beta = f_total.mean() / weight.mean()

    xi = compose_shift(xi_hat, invert_shift(v0))
    xi = xi - xi.mean()

    v_new = v0 + TorusVec.from_values(eta)
    d = -np.asarray(v_new.mean())
    v_new = v_new.translate(d) + d

    ledger = BetaLedger(
        beta0=beta0,
        beta1=tuple(beta1),
        beta2=tuple(beta2),
        beta3=tuple(beta3),
        alpha=(float(alpha[0]), float(alpha[1])),
        beta=float(beta),
        det_M=det,
    )
    H_new = state.H + xi
    a_new = state.a + alpha
    _, b_new = eval_Tc_and_b(H_new, a_new, state.c, G, w)
    return replace(
        state,
        H=H_new,
        v=v_new,
        a=a_new,
        b=b_new,
        ledger=ledger,
        iteration=state.iteration + 1,
    )


def solve_hj(
    c: float,
    G: TorusMat,
    omega,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> tuple[HjState, TorusVec]:
    """
    Solve the Hamilton–Jacobi interface problem for a normalized datum.

    Args:
        c: Jump constant (normalized units)
        G: Metric on the torus
        omega: Frequency of the linear field Y, with [ωᵀGω] = 1

    Returns:
        (state, X)

    Raises:
        ConfigError: If |c| exceeds the configured c_max
        NoConvergence: With the residual history
    """
    settings = SolverConfig.hj()
    tol = settings.tol if tol is None else tol
    max_iter = settings.max_iter if max_iter is None else max_iter
    if abs(c) > settings.c_max:
        raise ConfigError(f"|c|={abs(c):.3e} exceeds hj.c_max={settings.c_max:.1e}; override it")
    mean_sq = float(np.mean(norm_sq_Y(G, omega)))
    if abs(mean_sq - 1.0) > _NORMALIZATION_TOL:
        raise ValueError(f"boundary datum is not normalized: [|Y|^2]={mean_sq:.15f}")

    state = HjState.initial(c, G.grid)
    t_err, r_err = residual(state, G, omega)
    state.history.append(t_err + r_err)
    logger.info(f"[HJ] c={c:.3e}: initial residual {t_err + r_err:.3e}")

    while max(t_err, r_err) >= tol:
        if state.iteration >= max_iter:
            raise NoConvergence(state.history)
        state = hj_newton_step(state, G, omega)
        t_err, r_err = residual(state, G, omega)
        state.history.append(t_err + r_err)
        logger.info(
            f"[HJ] iter {state.iteration}: |T_c|={t_err:.3e} |R_c|={r_err:.3e} "
            f"b={state.b:.6e} det={state.ledger.det_M:.4e}"
        )
        if len(state.history) > 2 and state.history[-1] > state.history[-2]:
            raise NoConvergence(state.history)

    X = state.X(G, omega)
    logger.info(f"[HJ] solved: b={state.b:.6e} a=({state.a[0]:.3e}, {state.a[1]:.3e})")
    return state, X


def norm_residual(state: HjState, G: TorusMat, omega) -> float:
    """max | |X|²_G − (1+b)|Y|² − c |."""
    cov = state.covector(G, omega)
    g_inv, _ = inverse_2x2(G.values())
    x_sq = np.einsum("axy,abxy,bxy->xy", cov, g_inv, cov)
    y_sq = norm_sq_Y(G, omega)
    return float(np.max(np.abs(x_sq - (1 + state.b) * y_sq - state.c)))


def conjugacy_residual(state: HjState, G: TorusMat, omega) -> float:
    """‖X∘Φ − DΦ·sω‖∞, with Φ = id + v."""
    w = _omega(omega)
    X = state.X(G, w)
    pulled = compose_shift(X, state.v).values()
    dphi = np.eye(2)[:, :, None, None] + state.v.gradient().values()
    target = state.speed * np.einsum("abxy,b->axy", dphi, w)
    return float(np.max(np.abs(pulled - target)))


def closedness_residual(covector: np.ndarray) -> float:
    """‖∂₁w₂ − ∂₂w₁‖∞ of a covector field given by grid values (2, N₁, N₂)."""
    w = TorusVec.from_values(covector)
    curl = w.component(1).derivative(0) - w.component(0).derivative(1)
    return curl.sup_norm()


def sheared_flat_metric(omega, amplitude: float, grid: tuple[int, int]) -> TorusMat:
    """
    Metric G = I + ∂h ωᵀ + ω ∂hᵀ − (∂h·ω)ωωᵀ for a unit ω and h = ε sin(φ₁+φ₂)/(ω₁+ω₂).

    Then Gω = ω + ∂h is closed and |Y|² = ωᵀGω = 1 + ε cos(φ₁+φ₂), which is
    already normalized.
    """
    w = _omega(omega)
    if abs(float(w @ w) - 1.0) > _NORMALIZATION_TOL:
        raise ValueError(f"frequency must have unit length, got |omega|={np.linalg.norm(w):.15f}")
    if w[0] + w[1] == 0:
        raise ValueError("sheared metric needs omega_1 + omega_2 != 0")
    h = TorusScalar.from_function(
        lambda p1, p2: amplitude * np.sin(p1 + p2) / (w[0] + w[1]), grid
    )
    dh = h.gradient().values()  # (2, N1, N2)
    slope = np.einsum("axy,a->xy", dh, w)
    g = (
        np.eye(2)[:, :, None, None]
        + np.einsum("axy,b->abxy", dh, w)
        + np.einsum("a,bxy->abxy", w, dh)
        - slope * np.outer(w, w)[:, :, None, None]
    )
    return TorusMat.from_values(g)
