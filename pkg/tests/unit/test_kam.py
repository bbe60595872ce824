"""Unit tests for the KAM Newton scheme and torus families."""

from dataclasses import replace
from unittest.mock import patch

import numpy as np
import pytest

from app.exceptions import (
    DivisorUnderflow,
    MaxIterExceeded,
    ResidualAboveTolerance,
    TwistTooSmall,
)
from app.fields import perturb_div_free
from app.kam import (
    KamState,
    check_doubled_grid,
    continue_family,
    continue_family_async,
    convergence_order,
    family_target,
    linearized_defect,
    newton_correction,
    run_newton,
)
from app.smalldiv import Frequency2, certify
from app.torus_geom import mean_minor_radius
from tests.helpers import GOLDEN, GOLDEN_RADIUS, nested_field

GRID = (64, 64)


@pytest.fixture
def golden_torus():
    """Field, family and the exact invariant torus with ratio golden."""
    field, family = nested_field()
    return field, family, family.embedding(GOLDEN_RADIUS, GRID)


class TestNewton:
    """Convergence from a nearby family torus."""

    def test_converges_to_golden_torus(self):
        """The torus at s = 0.27 moves to the golden torus with Λ = 1."""
        field, family = nested_field()
        K0 = family.embedding(0.27, GRID)
        omega = certify((1.0, GOLDEN), 1e-3, 1.5, 40)
        state = run_newton(K0, omega, field, tol=1e-10, max_iter=10)
        assert state.err < 1e-10
        assert state.iteration <= 8
        assert abs(state.scale - 1.0) < 1e-8
        assert mean_minor_radius(state.K, 3.0) == pytest.approx(GOLDEN_RADIUS, abs=1e-8)
        assert state.verified_err < 1e-9
        assert state.twist == pytest.approx(family.twist(GOLDEN_RADIUS), rel=1e-4)

    def test_history_rows(self):
        """One row per iterate, starting with iteration zero."""
        field, family = nested_field()
        K0 = family.embedding(0.27, GRID)
        state = run_newton(K0, (1.0, GOLDEN), field, tol=1e-10, max_iter=10)
        assert [row[0] for row in state.history] == list(range(state.iteration + 1))
        assert state.initial_err == state.history[0][1]
        assert state.history[-1][1] == state.err

    def test_already_invariant(self, golden_torus):
        """An invariant torus needs no steps."""
        field, _, K = golden_torus
        state = run_newton(K, (1.0, GOLDEN), field, tol=1e-10)
        assert state.iteration == 0
        assert state.scale == 1.0

    def test_budget_exhausted(self):
        """max_iter = 1 is not enough from s = 0.27."""
        field, family = nested_field()
        K0 = family.embedding(0.27, GRID)
        with pytest.raises(MaxIterExceeded) as info:
            run_newton(K0, (1.0, GOLDEN), field, tol=1e-12, max_iter=1)
        assert info.value.exit_code == 4

    def test_resonant_target(self, golden_torus):
        """A rational direction underflows in the first cohomological solve."""
        field, _, K = golden_torus
        with pytest.raises(DivisorUnderflow):
            run_newton(K, (1.0, 0.5), field, tol=1e-10, max_iter=3)

    def test_doubled_grid_recheck(self, golden_torus):
        """An invariant torus passes the recheck and its value is recorded."""
        field, _, K = golden_torus
        state = KamState(K=K, err=0.0)
        assert check_doubled_grid(state, (1.0, GOLDEN), field, tol=1e-10) < 1e-9
        assert state.verified_err is not None

    def test_doubled_grid_rejects_understated_error(self):
        """A neighbouring family torus with a recorded error of zero fails the recheck."""
        field, family = nested_field()
        state = KamState(K=family.embedding(GOLDEN_RADIUS + 1e-3, GRID), err=0.0)
        with pytest.raises(ResidualAboveTolerance) as info:
            check_doubled_grid(state, (1.0, GOLDEN), field, tol=1e-10)
        assert info.value.name == "doubled_grid"
        assert state.verified_err > 1e-9


class TestErrorFloor:
    """Newton runs on fields that only support a limited accuracy."""

    def _steps(self, K, errs):
        errs = iter(errs)

        def step(state, field, omega0, floor=None):
            row = (state.iteration + 1, 0.0, 1.0, 0.1, 0.1)
            return replace(
                state,
                K=K,
                err=next(errs),
                iteration=state.iteration + 1,
                history=state.history + [row],
            )

        return step

    @patch("app.kam.newton_step")
    def test_stall_keeps_the_last_good_iterate(self, mock_step, golden_torus):
        """Growth after reaching the floor ends the run at the previous iterate."""
        field, family, K = golden_torus
        mock_step.side_effect = self._steps(K, [1e-6, 5e-10, 3e-8])
        K0 = family.embedding(0.27, GRID)
        state = run_newton(K0, (1.0, GOLDEN), field, tol=1e-12, max_iter=10, floor=1e-8)
        assert state.stalled
        assert state.err == 5e-10
        assert state.iteration == 2
        assert mock_step.call_count == 3
        assert mock_step.call_args.kwargs["floor"] == 1e-8

    @patch("app.kam.newton_step")
    def test_growth_above_the_floor_is_not_a_stall(self, mock_step, golden_torus):
        """Without reaching the floor the run keeps iterating."""
        field, family, K = golden_torus
        mock_step.side_effect = self._steps(K, [1e-6, 5e-5])
        K0 = family.embedding(0.27, GRID)
        with pytest.raises(MaxIterExceeded):
            run_newton(K0, (1.0, GOLDEN), field, tol=1e-12, max_iter=2, floor=1e-8)

    def test_converged_runs_are_not_stalled(self, golden_torus):
        """An invariant torus finishes normally."""
        field, _, K = golden_torus
        state = run_newton(K, (1.0, GOLDEN), field, tol=1e-10, floor=1e-8)
        assert not state.stalled


@pytest.mark.slow
class TestPerturbedFields:
    """Newton from the golden torus into δ·curl A perturbations."""

    DELTAS = (1e-2, 1e-3, 1e-4)

    def _solve(self, golden_torus, delta):
        base, _, K = golden_torus
        field = perturb_div_free(base, delta, seed=0)
        return run_newton(K, (1.0, GOLDEN), field, tol=1e-11, max_iter=20)

    @pytest.mark.parametrize("delta", DELTAS)
    def test_superlinear_convergence(self, golden_torus, delta):
        """Each step above 1e-8 contracts the error at least like e^1.5."""
        state = self._solve(golden_torus, delta)
        assert state.err < 1e-11
        assert state.iteration >= 1
        errs = [row[1] for row in state.history]
        for before, after in zip(errs, errs[1:]):
            if before > 1e-8:
                assert after <= 10 * before**1.5

    def test_scale_shift_is_linear_in_delta(self, golden_torus):
        """|Λ − 1| grows like δ."""
        shifts = [abs(self._solve(golden_torus, d).scale - 1.0) for d in self.DELTAS]
        slope = np.polyfit(np.log(self.DELTAS), np.log(shifts), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.2)


class TestCorrection:
    """A single linearized solve."""

    def test_twist_too_small(self):
        """Without shear the average system is singular."""
        field, family = nested_field(omega2=(0.3,))
        K = family.embedding(0.3, GRID)
        with pytest.raises(TwistTooSmall) as info:
            newton_correction(K, (1.0, GOLDEN), field)
        assert info.value.exit_code == 3

    def test_linearized_defect_is_quadratic(self):
        """The linearized equation holds up to the removed solvability average."""
        field, family = nested_field()
        K = family.embedding(0.29, GRID)
        omega = np.array([1.0, GOLDEN])
        corr = newton_correction(K, omega, field)
        assert abs(corr.mean_defect) < 1e-10
        assert np.max(np.abs(linearized_defect(K, omega, field, corr))) < 1e-8
        assert corr.twist > 0


class TestConvergenceOrder:
    """Fitted exponent of the error sequence."""

    def test_quadratic_history(self):
        """1e-2, 1e-4, 1e-8 has order two."""
        history = [(0, 1e-2), (1, 1e-4), (2, 1e-8)]
        assert convergence_order(history) == pytest.approx(2.0)

    def test_too_short(self):
        """Fewer than two pairs give NaN."""
        assert np.isnan(convergence_order([(0, 1e-2), (1, 1e-4)]))


class TestFamilies:
    """Continuation over nearby Diophantine frequencies."""

    def _targets(self):
        return [certify((1.0, GOLDEN + d), 1e-4, 1.5, 20) for d in (-0.004, 0.004)]

    @pytest.mark.asyncio
    async def test_sides_follow_the_twist(self, golden_torus):
        """Larger ratios land outside the seed torus."""
        field, _, K = golden_torus
        members = await continue_family_async(
            K, (1.0, GOLDEN), field, self._targets(), tol=1e-10, max_iter=10, workers=2
        )
        assert all(member.ok for member in members)
        assert [member.side for member in members] == [-1, 1]
        assert [member.predicted_side for member in members] == [-1, 1]
        for member in members:
            expected = (member.target.ratio - 0.5) / 0.4
            assert mean_minor_radius(member.state.K, 3.0) == pytest.approx(expected, abs=1e-7)
            assert member.separation == pytest.approx(0.02, abs=1e-6)

    def test_failures_are_reported_per_target(self, golden_torus):
        """A resonant target fails without stopping the others."""
        field, _, K = golden_torus
        rational = Frequency2(np.array([1.0, 0.5]), 1e-4, 1.5, 20, 0.0, 0.0)
        members = continue_family(
            K, (1.0, GOLDEN), field, [rational, self._targets()[1]], tol=1e-10, max_iter=10
        )
        assert not members[0].ok
        assert isinstance(members[0].error, DivisorUnderflow)
        assert members[1].ok

    def test_family_target(self, golden_torus):
        """A step of 0.01 outward moves the ratio by about 0.004."""
        _, family, K = golden_torus
        state = KamState(K=K, err=0.0, twist=family.twist(GOLDEN_RADIUS))
        target = family_target(state, (1.0, GOLDEN), 0.01, 1, 1e-4, 1.5, 20)
        assert target.ratio > GOLDEN
        assert target.ratio == pytest.approx(GOLDEN + 0.004, abs=4e-4)
