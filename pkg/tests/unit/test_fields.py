"""Unit tests for ambient fields."""

import numpy as np
import pytest

from app.exceptions import ConfigError, GeometryError
from app.fields import (
    CurlPotentialField,
    FieldDescriptor,
    FieldKind,
    FrequencyProfile,
    NestedFamily,
    SyntheticNestedField,
    build_field,
    curl_from_jacobian,
    perturb_div_free,
)
from app.fields.synthetic import kepler_angle
from tests.helpers import nested_field


def tube_points(family, s=0.3, count=7):
    """Points on the torus of minor radius s."""
    angles = np.linspace(0.1, 6.0, count)
    return family.point(s, angles, angles[::-1] * 1.3)


class TestSyntheticNestedField:
    """Integrable field with circular invariant tori."""

    def test_divergence_free(self):
        """The Jacobian trace vanishes."""
        field, family = nested_field()
        points = np.concatenate([tube_points(family, s) for s in (0.1, 0.3, 0.5)])
        assert np.max(np.abs(field.divergence(points))) < 1e-12

    def test_jacobian_matches_finite_differences(self):
        """Analytic Jacobian against central differences."""
        field, family = nested_field()
        point = tube_points(family, 0.3, 1)[0]
        h = 1e-6
        numeric = np.empty((3, 3))
        for j in range(3):
            step = np.zeros(3)
            step[j] = h
            numeric[:, j] = (field.evaluate(point + step) - field.evaluate(point - step)) / (2 * h)
        assert np.allclose(field.jacobian(point), numeric, atol=1e-7)

    def test_tori_are_invariant(self):
        """B∘K_s = DK_s·ω(s) on the family tori."""
        from app.torus_geom import invariance_error

        field, family = nested_field()
        K = family.embedding(0.3, (32, 32))
        assert invariance_error(K, family.frequency(0.3), field).sup_norm() < 1e-9

    def test_closed_form_twist(self):
        """The twist of the family torus matches its closed form."""
        from app.torus_geom import twist_data

        field, family = nested_field()
        K = family.embedding(0.3, (32, 32))
        _, twist = twist_data(K, family.frequency(0.3), field)
        assert twist == pytest.approx(family.twist(0.3), rel=1e-7)
        assert family.twist(0.3) == pytest.approx(0.4 / (3.0 * 0.3))

    def test_thin_tube_twist_scaling(self):
        """With ω₂ = 0.5 + 2s⁴ the twist of thin tori grows like s²."""
        from app.torus_geom import twist_data

        profile = FrequencyProfile((1.0,), (0.5, 0.0, 0.0, 0.0, 2.0))
        field = SyntheticNestedField(3.0, profile, (0.01, 0.5))
        family = NestedFamily(field)
        radii = np.array([0.05, 0.1, 0.2])
        twists = [
            twist_data(family.embedding(s, (32, 32)), family.frequency(s), field)[1] for s in radii
        ]
        slope = np.polyfit(np.log(radii), np.log(np.abs(twists)), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.2)

    def test_coordinates_invert_points(self):
        """coordinates() recovers (s, φ₁, ψ)."""
        _, family = nested_field()
        point = family.point(0.25, np.array(0.7), np.array(1.1))
        assert np.allclose(family.coordinates(point), [0.25, 0.7, 1.1], atol=1e-12)

    def test_family_range(self):
        """Radii outside the family are rejected."""
        _, family = nested_field()
        with pytest.raises(GeometryError, match="outside family range"):
            family.frequency(0.9)

    def test_self_intersecting_family(self):
        """s_max must stay below R."""
        with pytest.raises(GeometryError, match="self-intersect"):
            SyntheticNestedField(0.5, FrequencyProfile(), (0.1, 0.6))

    def test_profile_shear(self):
        """A constant ratio is not sheared."""
        assert not FrequencyProfile((1.0,), (0.3,)).sheared
        assert FrequencyProfile((1.0,), (0.5, 0.4)).sheared
        assert FrequencyProfile((1.0,), (0.5, 0.4)).ratio(0.5) == pytest.approx(0.7)


class TestKeplerAngle:
    """θ = φ + e sin φ."""

    def test_solves_equation(self):
        """The returned angle satisfies the equation."""
        theta = np.linspace(0.0, 2 * np.pi, 9)
        phi = kepler_angle(theta, 0.3)
        assert np.allclose(phi + 0.3 * np.sin(phi), theta, atol=1e-14)

    def test_rejects_large_parameter(self):
        """|e| >= 1 has no smooth inverse."""
        with pytest.raises(GeometryError):
            kepler_angle(np.zeros(3), 1.0)


class TestPerturbations:
    """Curl-potential perturbations."""

    def test_random_potential_is_bounded(self, rng):
        """The normalized field never exceeds one."""
        field = CurlPotentialField.random(seed=3)
        points = rng.uniform(-5.0, 5.0, size=(200, 3))
        assert np.max(np.linalg.norm(field.evaluate(points), axis=-1)) <= 1.0 + 1e-12

    def test_perturbation_stays_divergence_free(self, rng):
        """δ·curl A keeps div B = 0."""
        base, _ = nested_field()
        field = perturb_div_free(base, 0.05, seed=1)
        points = np.array([[3.2, 0.1, 0.05], [-2.9, 0.4, -0.1]])
        assert field.divergence_free
        assert np.max(np.abs(field.divergence(points))) < 1e-12

    def test_zero_amplitude_is_identity(self):
        """δ = 0 returns the field itself."""
        base, _ = nested_field()
        assert perturb_div_free(base, 0.0) is base

    def test_negative_amplitude(self):
        """δ < 0 is rejected."""
        base, _ = nested_field()
        with pytest.raises(ValueError, match=">= 0"):
            perturb_div_free(base, -0.1)

    def test_curl_from_jacobian(self):
        """curl of the rotation field (−y, x, 0) is (0, 0, 2)."""
        jac = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        assert np.allclose(curl_from_jacobian(jac), [0.0, 0.0, 2.0])


class TestDescriptors:
    """[field] sections."""

    def test_from_section(self):
        """Kind strings map to the enum and other keys pass through."""
        descriptor = FieldDescriptor.from_section({"kind": "perturbed", "delta": 0.01})
        assert descriptor.kind is FieldKind.PERTURBED
        assert descriptor.delta == 0.01
        assert descriptor.to_dict()["kind"] == "perturbed"

    def test_unknown_kind(self):
        """Unknown kinds are configuration errors."""
        with pytest.raises(ConfigError, match="unknown field kind"):
            FieldDescriptor.from_section({"kind": "dipole"})

    def test_build_synthetic(self):
        """A synthetic descriptor builds the bare nested field."""
        field, family = build_field(FieldDescriptor())
        assert isinstance(field, SyntheticNestedField)
        assert family.field is field

    def test_build_perturbed(self):
        """A perturbed descriptor keeps the unperturbed family for starting tori."""
        field, family = build_field(FieldDescriptor(kind=FieldKind.PERTURBED, delta=0.01))
        assert field is not family.field
        assert field.divergence_free
