"""Unit tests for the Hamilton-Jacobi interface solver."""

import numpy as np
import pytest

from app.config import SolverConfig
from app.exceptions import ConfigError, MFloorViolated, NoConvergence
from app.hj import (
    HjState,
    closedness_residual,
    conjugacy_residual,
    covector_Y,
    eval_Tc,
    eval_Tc_and_b,
    hj_newton_step,
    norm_residual,
    norm_sq_Y,
    normalize_datum,
    normalized_jump,
    physical_jump,
    sheared_flat_metric,
    solve_hj,
)
from app.spectral import TorusMat, grid_points
from tests.helpers import sheared_metric, trig_scalar, unit_golden

GRID = (16, 16)


class TestDatum:
    """Boundary metrics and normalization."""

    def test_sheared_metric_is_normalized(self):
        """[|Y|²] = 1 and |Y|² = 1 + ε cos(φ₁ + φ₂)."""
        G, omega = sheared_metric(0.02)
        phi1, phi2 = grid_points(GRID)
        assert np.mean(norm_sq_Y(G, omega)) == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(norm_sq_Y(G, omega), 1 + 0.02 * np.cos(phi1 + phi2), atol=1e-13)

    def test_sheared_metric_has_closed_dual(self):
        """Gω = ω + ∂h is closed."""
        G, omega = sheared_metric(0.02)
        assert closedness_residual(covector_Y(G, omega)) < 1e-13

    def test_sheared_metric_needs_unit_frequency(self):
        """Non-unit ω is rejected."""
        with pytest.raises(ValueError, match="unit length"):
            sheared_flat_metric(np.array([1.0, 0.5]), 0.01, GRID)

    def test_normalize_datum(self):
        """G = 4I halves the field."""
        G = TorusMat.constant(4 * np.eye(2), GRID)
        sigma, w = normalize_datum(G, unit_golden())
        assert sigma == pytest.approx(0.5)
        assert np.allclose(w, 0.5 * unit_golden())
        assert np.mean(norm_sq_Y(G, w)) == pytest.approx(1.0)

    def test_jump_units(self):
        """Physical and normalized jump constants convert both ways."""
        assert physical_jump(normalized_jump(3e-3, 0.5), 0.5) == pytest.approx(3e-3)
        assert normalized_jump(1.0, 0.5) == pytest.approx(0.25)


class TestResiduals:
    """T_c and the initial state."""

    def test_zero_state_residual(self):
        """With H = 0 and a = 0, T_c = cε cos(φ₁ + φ₂) and b = 0."""
        G, omega = sheared_metric(0.01)
        state = HjState.initial(1e-3, GRID)
        t_c, b = eval_Tc_and_b(state.H, state.a, state.c, G, omega)
        phi1, phi2 = grid_points(GRID)
        assert b == pytest.approx(0.0, abs=1e-15)
        assert np.allclose(t_c.values(), 1e-5 * np.cos(phi1 + phi2), atol=1e-15)

    def test_tc_has_zero_mean(self):
        """b absorbs the mean of T_c."""
        G, omega = sheared_metric(0.01)
        H = trig_scalar(GRID) * 0.01
        a = np.array([0.01, -0.02])
        assert abs(eval_Tc(H, a, 1e-3, G, omega).mean()) < 1e-14


class TestSolve:
    """Newton iteration for (H, v, a, b)."""

    def test_zero_jump_is_trivial(self):
        """c = 0 needs no iteration and X = ω."""
        G, omega = sheared_metric(0.01)
        state, X = solve_hj(0.0, G, omega)
        assert state.iteration == 0
        assert np.allclose(X.values(), omega[:, None, None])

    @pytest.mark.parametrize("c", [1e-3, -1e-3, 1e-4, -1e-4])
    def test_small_jump(self, c):
        """Small jumps of either sign converge with all residuals small."""
        G, omega = sheared_metric(0.01)
        state, X = solve_hj(c, G, omega)
        assert state.iteration >= 1
        assert norm_residual(state, G, omega) < 1e-10
        assert conjugacy_residual(state, G, omega) < 1e-10
        assert closedness_residual(state.covector(G, omega)) < 1e-12
        assert X.shape == (2,)
        assert np.sum(np.abs(state.a)) + abs(state.b) <= 10 * abs(c)

    def test_solution_is_lipschitz_in_the_jump(self):
        """Difference quotients of X over c agree across pairs of jumps."""
        G, omega = sheared_metric(0.01)
        jumps = [1e-3, 5e-4, -5e-4, -1e-3]
        fields = {c: solve_hj(c, G, omega)[1].values() for c in jumps}
        quotients = [
            np.max(np.abs(fields[c] - fields[d])) / abs(c - d)
            for i, c in enumerate(jumps)
            for d in jumps[i + 1 :]
        ]
        assert all(np.isfinite(quotients))
        assert min(quotients) > 0
        assert max(quotients) <= 1.5 * min(quotients)

    def test_ledger_identity(self):
        """β matches β₀ + Σ(β₁ + β₂ + β₃)α after a step."""
        G, omega = sheared_metric(0.01)
        state = hj_newton_step(HjState.initial(1e-3, GRID), G, omega)
        ledger = state.ledger
        assert ledger.reconstructed() == pytest.approx(ledger.beta, abs=1e-12)
        assert abs(ledger.det_M) > 1e-6

    def test_jump_above_limit(self):
        """|c| > c_max is a configuration error."""
        G, omega = sheared_metric(0.01)
        with pytest.raises(ConfigError, match="c_max"):
            solve_hj(0.05, G, omega)

    def test_unnormalized_datum(self):
        """[|Y|²] must be one."""
        G = TorusMat.constant(2 * np.eye(2), GRID)
        with pytest.raises(ValueError, match="not normalized"):
            solve_hj(1e-3, G, unit_golden())

    def test_matrix_floor(self):
        """An oversized floor makes the averaged matrix look singular."""
        SolverConfig.override("hj", matrix_floor=1e6)
        G, omega = sheared_metric(0.01)
        with pytest.raises(MFloorViolated) as info:
            solve_hj(1e-3, G, omega)
        assert info.value.exit_code == 3

    def test_no_convergence(self):
        """The residual history comes with the failure."""
        G, omega = sheared_metric(0.01)
        with pytest.raises(NoConvergence) as info:
            solve_hj(1e-3, G, omega, tol=1e-30, max_iter=1)
        assert len(info.value.history) == 2
        assert info.value.exit_code == 4
