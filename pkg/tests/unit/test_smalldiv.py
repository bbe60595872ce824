"""Unit tests for Diophantine certificates and cohomological equations."""

import numpy as np
import pytest

from app.exceptions import (
    DegenerateWeight,
    DivisorUnderflow,
    NonzeroMean,
    NotDiophantineUpToCutoff,
)
from app.smalldiv import (
    Frequency2,
    certify,
    divisors,
    min_grid_divisor,
    solve_cohomological,
    solve_with_free_mean,
)
from app.spectral import TorusScalar, TorusVec, grid_points
from tests.helpers import GOLDEN, trig_scalar

GRID = (32, 32)


class TestCertify:
    """Diophantine scans up to a cutoff."""

    def test_golden_frequency_certifies(self):
        """(1, golden) passes with the default constants."""
        frequency = certify((1.0, GOLDEN), 1e-3, 1.5, 40)
        assert frequency.ratio == pytest.approx(GOLDEN)
        assert frequency.min_weighted >= 1e-3
        assert frequency.k_max == 40

    def test_rational_frequency_reports_first_resonance(self):
        """(1, 1/2) fails at the shortest resonant k."""
        with pytest.raises(NotDiophantineUpToCutoff) as info:
            certify((1.0, 0.5), 1e-3, 1.5, 40)
        assert info.value.k == (1, -2)
        assert info.value.exit_code == 2

    def test_zero_vector(self):
        """The zero vector is never Diophantine."""
        with pytest.raises(NotDiophantineUpToCutoff):
            certify((0.0, 0.0), 1e-3, 1.5, 10)

    def test_bad_constants(self):
        """gamma must be positive and tau above one."""
        with pytest.raises(ValueError, match="gamma > 0"):
            certify((1.0, GOLDEN), 0.0, 1.5, 10)
        with pytest.raises(ValueError, match="tau > 1"):
            certify((1.0, GOLDEN), 1e-3, 1.0, 10)

    def test_certified_vector_is_read_only(self):
        """The stored frequency cannot be modified in place."""
        frequency = certify((1.0, GOLDEN), 1e-3, 1.5, 10)
        with pytest.raises(ValueError):
            frequency.omega[0] = 2.0


class TestFrequency2:
    """Derived quantities of a certified frequency."""

    def test_scaled(self):
        """Scaling multiplies ω, γ and the divisors."""
        frequency = certify((1.0, GOLDEN), 1e-3, 1.5, 20)
        doubled = frequency.scaled(2.0)
        assert np.allclose(doubled.omega, 2 * frequency.omega)
        assert doubled.gamma == pytest.approx(2e-3)
        assert doubled.min_divisor == pytest.approx(2 * frequency.min_divisor)
        assert doubled.ratio == pytest.approx(frequency.ratio)

    def test_scaled_by_zero(self):
        """A zero scale loses the certificate."""
        frequency = certify((1.0, GOLDEN), 1e-3, 1.5, 20)
        with pytest.raises(NotDiophantineUpToCutoff):
            frequency.scaled(0.0)

    def test_perp_and_norm(self):
        """ω^⊥ = (ω₂, −ω₁)."""
        frequency = Frequency2(np.array([3.0, 4.0]), 1e-3, 1.5, 10, 1.0, 1.0)
        assert np.allclose(frequency.perp, [4.0, -3.0])
        assert frequency.norm == pytest.approx(5.0)


class TestDivisors:
    """k·ω over a grid."""

    def test_min_grid_divisor_matches_scan(self):
        """Smallest nonzero |k·ω| over the retained modes."""
        omega = (1.0, GOLDEN)
        expected = min(
            abs(k1 + k2 * GOLDEN)
            for k1 in range(-15, 16)
            for k2 in range(-15, 16)
            if (k1, k2) != (0, 0)
        )
        assert min_grid_divisor(GRID, omega) == pytest.approx(expected)

    def test_divisor_array_shape(self):
        """One divisor per coefficient."""
        assert divisors(GRID, (1.0, GOLDEN)).shape == GRID


class TestCohomological:
    """L_ω u = f with constant ω."""

    def test_solves_single_mode(self):
        """cos(φ₁ + φ₂) gives sin(φ₁ + φ₂)/(ω₁ + ω₂)."""
        omega = (1.0, GOLDEN)
        f = TorusScalar.from_function(lambda p1, p2: np.cos(p1 + p2), GRID)
        u = solve_cohomological(f, omega)
        phi1, phi2 = grid_points(GRID)
        assert np.allclose(u.values(), np.sin(phi1 + phi2) / (1 + GOLDEN), atol=1e-13)
        assert u.mean() == 0.0

    def test_back_substitution(self):
        """L_ω u reproduces a general zero-mean right side."""
        omega = certify((1.0, GOLDEN), 1e-3, 1.5, 40)
        f = trig_scalar(GRID)
        u = solve_cohomological(f, omega)
        assert (u.l_omega(omega) - f).sup_norm() < 1e-13

    def test_vector_right_side(self):
        """Components are solved independently."""
        omega = (1.0, GOLDEN)
        f = TorusVec.from_function(lambda p1, p2: [np.cos(p1), np.sin(p2)], GRID)
        u = solve_cohomological(f, omega)
        assert u.shape == (2,)
        assert (u.l_omega(omega) - f).sup_norm() < 1e-13

    def test_nonzero_mean(self):
        """A right side with mean is rejected."""
        f = TorusScalar.from_function(lambda p1, p2: 1.0 + np.cos(p1), GRID)
        with pytest.raises(NonzeroMean) as info:
            solve_cohomological(f, (1.0, GOLDEN))
        assert isinstance(info.value, ValueError)
        assert info.value.exit_code == 2

    def test_resonant_divisor(self):
        """A rational frequency underflows on its resonant mode."""
        f = TorusScalar.from_function(lambda p1, p2: np.cos(p1 - 2 * p2), GRID)
        with pytest.raises(DivisorUnderflow) as info:
            solve_cohomological(f, (1.0, 0.5))
        assert info.value.k == (1, -2)


class TestFreeMean:
    """L_ω u = f − μg with μ chosen by averages."""

    def test_mean_is_absorbed(self):
        """μ = [f]/[g] and the remainder is solved."""
        omega = (1.0, GOLDEN)
        f = TorusScalar.from_function(lambda p1, p2: 2.0 + np.cos(p1), GRID)
        g = TorusScalar.constant(1.0, GRID)
        u, mu = solve_with_free_mean(f, g, omega)
        assert mu == pytest.approx(2.0)
        phi1, _ = grid_points(GRID)
        assert np.allclose(u.l_omega(omega).values(), np.cos(phi1), atol=1e-13)

    def test_degenerate_weight(self):
        """A zero-mean weight cannot fix the mean."""
        f = TorusScalar.constant(1.0, GRID)
        g = TorusScalar.from_function(lambda p1, p2: np.cos(p1), GRID)
        with pytest.raises(DegenerateWeight):
            solve_with_free_mean(f, g, (1.0, GOLDEN))
