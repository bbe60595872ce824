"""Unit tests for embedded tori and their geometric invariants."""

import numpy as np
import pytest

from app.exceptions import GeometryError
from app.fields import perturb_div_free
from app.spectral import TorusMat, TorusVec, grid_points
from app.torus_geom import (
    Embedding,
    TwistUpdate,
    frame_compose,
    frame_decompose,
    invariance_error,
    mean_minor_radius,
    nested_distance,
    nondeg_type_I,
    nondeg_type_II,
    normal_offsets,
    normal_separation,
    normal_transport_defect,
    solvability_average,
    surface_divergence,
    twist_beltrami,
    twist_update_coefficients,
)
from tests.helpers import GOLDEN, nested_field, standard_torus

GRID = (32, 32)


class TestEmbedding:
    """Frames, metrics and global quantities."""

    def test_metric_of_torus_of_revolution(self):
        """G = diag(ρ², r²) with ρ = R + r cos φ₂."""
        K = standard_torus(3.0, 0.3, GRID)
        _, phi2 = grid_points(GRID)
        g = K.g_values
        assert np.allclose(g[0, 0], (3.0 + 0.3 * np.cos(phi2)) ** 2, atol=1e-11)
        assert np.allclose(g[1, 1], 0.09, atol=1e-12)
        assert np.allclose(g[0, 1], 0.0, atol=1e-12)

    def test_enclosed_volume_and_orientation(self):
        """Volume 2π²Rr² with an outward normal."""
        K = standard_torus(3.0, 0.3, GRID)
        assert K.enclosed_volume == pytest.approx(2 * np.pi**2 * 3.0 * 0.09, rel=1e-10)
        assert K.orientation == 1

    def test_mean_normal_length(self):
        """[|n|] = rR for the torus of revolution."""
        K = standard_torus(3.0, 0.3, GRID)
        assert K.mean_normal_length == pytest.approx(0.9, rel=1e-12)

    def test_not_an_immersion(self):
        """A circle repeated along φ₂ has no normal."""
        phi1, _ = grid_points(GRID)
        values = np.stack([np.cos(phi1), np.sin(phi1), np.zeros(GRID)])
        with pytest.raises(GeometryError, match="immersion"):
            Embedding(TorusVec.from_values(values))

    def test_needs_three_components(self):
        """Embeddings live in R³."""
        with pytest.raises(GeometryError, match="three components"):
            Embedding(TorusVec.zeros(GRID, (2,)))

    def test_frame_is_complete(self, rng):
        """Decomposing into (DK, n/|n|²) and recomposing is the identity."""
        K = standard_torus(3.0, 0.3, GRID)
        V = rng.standard_normal((3, *GRID))
        xi1, xi2 = frame_decompose(K, V)
        assert np.allclose(frame_compose(K, xi1, xi2), V, atol=1e-12)

    def test_resize_keeps_geometry(self):
        """Resampling on a finer grid keeps the volume."""
        K = standard_torus(3.0, 0.3, (16, 16))
        assert K.resize(GRID).enclosed_volume == pytest.approx(K.enclosed_volume, rel=1e-12)


class TestDefects:
    """Invariance error and its identities."""

    def test_solvability_average_vanishes(self):
        """[nᵀE] is the flux of a divergence-free field through a closed surface."""
        base, _ = nested_field()
        field = perturb_div_free(base, 0.02, seed=4)
        K = standard_torus(3.0, 0.3, GRID)
        error = invariance_error(K, (1.0, GOLDEN), field)
        assert error.sup_norm() > 1e-3
        assert abs(solvability_average(K, error)) < 1e-10

    def test_normal_transport_identity(self):
        """L_ω n + DBᵀn matches the error terms for any torus."""
        base, _ = nested_field()
        field = perturb_div_free(base, 0.02, seed=4)
        K = standard_torus(3.0, 0.3, (64, 64))
        assert normal_transport_defect(K, (1.0, GOLDEN), field).sup_norm() < 1e-8


class TestCertificates:
    """Type-I matrix and twist bookkeeping."""

    def test_type_I_on_flat_metric(self):
        """A constant field on the flat torus has M = I."""
        G = TorusMat.constant(np.eye(2), GRID)
        M, det = nondeg_type_I(G, (1.0, GOLDEN))
        assert np.allclose(M, np.eye(2), atol=1e-14)
        assert det == pytest.approx(1.0)

    def test_twist_update(self):
        """T(λ) = geometric − λa vanishes at the forbidden factor."""
        update = TwistUpdate(geometric=1.0, a=2.0, current=0.6, lam=0.2)
        assert update.forbidden == pytest.approx(0.5)
        assert update.twist_for(update.forbidden) == pytest.approx(0.0)
        assert update.gap(0.1) == pytest.approx(0.03)

    def test_beltrami_twist_matches_update(self):
        """The Beltrami twist equals the geometric part minus λa."""
        field, family = nested_field()
        K, omega = family.embedding(0.3, GRID), family.frequency(0.3)
        _, twist, F = twist_beltrami(K, omega, field, 0.4)
        update = twist_update_coefficients(K, omega, field, 0.4)
        assert twist == pytest.approx(update.current, rel=1e-9, abs=1e-12)
        values = F.values()
        assert np.all(values * values[0, 0] > 0)

    def test_type_II_is_the_geometric_twist(self):
        """T + λa does not depend on λ."""
        field, family = nested_field()
        K, omega = family.embedding(0.3, GRID), family.frequency(0.3)
        update = twist_update_coefficients(K, omega, field, 0.0)
        assert nondeg_type_II(K, omega, field, 0.4) == pytest.approx(update.geometric, rel=1e-9)
        normalized = nondeg_type_II(K, omega, field, 0.4, normalized=True)
        assert normalized == pytest.approx(update.geometric / float(omega @ omega), rel=1e-9)


class TestDistances:
    """Nesting diagnostics."""

    def test_nested_distance(self):
        """Family tori 0.1 apart."""
        _, family = nested_field()
        inner, outer = family.embedding(0.2, GRID), family.embedding(0.3, GRID)
        assert nested_distance(inner, outer) == pytest.approx(0.1, abs=1e-12)

    def test_normal_offsets(self):
        """Points of a wider torus sit 0.05 outside, along the normal."""
        inner, outer = standard_torus(3.0, 0.3, GRID), standard_torus(3.0, 0.35, GRID)
        assert np.allclose(normal_offsets(inner, outer.points()), 0.05, atol=1e-10)
        assert np.allclose(normal_offsets(outer, inner.points()), -0.05, atol=1e-10)

    def test_normal_separation(self):
        """The gap is positive whichever torus is measured against."""
        inner, outer = standard_torus(3.0, 0.3, GRID), standard_torus(3.0, 0.35, GRID)
        assert normal_separation(inner, outer) == pytest.approx(0.05, abs=1e-10)
        assert normal_separation(outer, inner) == pytest.approx(0.05, abs=1e-10)

    def test_crossing_tori(self):
        """A sideways shift makes two equal tori cross."""
        K = standard_torus(3.0, 0.3, GRID)
        shift = np.zeros((3, *GRID))
        shift[0] = 0.1
        shifted = K.displaced(shift)
        assert nested_distance(K, shifted) > 0
        assert normal_separation(K, shifted) < 0

    def test_mean_minor_radius(self):
        """Every point of a family torus is s away from the axis circle."""
        _, family = nested_field()
        assert mean_minor_radius(family.embedding(0.3, GRID), 3.0) == pytest.approx(0.3)


class TestSurfaceDivergence:
    """Divergence of tangent currents."""

    def test_toroidal_current_is_divergence_free(self):
        """J = ∂₁K on a torus of revolution."""
        K = standard_torus(3.0, 0.3, GRID)
        current = K.push(np.stack([np.ones(GRID), np.zeros(GRID)]))
        assert surface_divergence(K, current).sup_norm() < 1e-11

    def test_poloidal_current(self):
        """J = ∂₂K has divergence −r sin φ₂/ρ."""
        K = standard_torus(3.0, 0.3, GRID)
        current = K.push(np.stack([np.zeros(GRID), np.ones(GRID)]))
        _, phi2 = grid_points(GRID)
        expected = -0.3 * np.sin(phi2) / (3.0 + 0.3 * np.cos(phi2))
        assert np.allclose(surface_divergence(K, current).values(), expected, atol=1e-10)
