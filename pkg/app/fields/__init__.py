"""Ambient vector fields: synthetic nested tori, perturbations, jets and tracing."""

from .base import AmbientField, SumField, curl_from_jacobian
from .jet import JetAmbientField
from .perturbed import CurlPotentialField, perturb_div_free
from .synthetic import FrequencyProfile, NestedFamily, SyntheticNestedField
from .tracing import RotationEstimate, fieldline_rotation_number, richardson_ratio
from .types import FieldDescriptor, FieldKind


def synthetic_nested_field(
    major_radius: float, profile: FrequencyProfile, s_range: tuple[float, float]
) -> SyntheticNestedField:
    """Nested circular tori around a ring, with frequency profile ω(s)."""
    return SyntheticNestedField(major_radius, profile, s_range)


def build_field(descriptor: FieldDescriptor) -> tuple[AmbientField, NestedFamily]:
    """
    Build the ambient field described by a ``[field]`` section.

    Returns:
        (field, family) where family describes the unperturbed nested tori
    """
    base = synthetic_nested_field(
        descriptor.major_radius,
        FrequencyProfile(tuple(descriptor.omega1), tuple(descriptor.omega2)),
        (descriptor.s_min, descriptor.s_max),
    )
    family = NestedFamily(base)
    if descriptor.kind == FieldKind.SYNTHETIC:
        return base, family
    field = perturb_div_free(
        base, descriptor.delta, seed=descriptor.seed, modes=descriptor.modes
    )
    return field, family


__all__ = [
    "AmbientField",
    "CurlPotentialField",
    "FieldDescriptor",
    "FieldKind",
    "FrequencyProfile",
    "JetAmbientField",
    "NestedFamily",
    "RotationEstimate",
    "SumField",
    "SyntheticNestedField",
    "build_field",
    "curl_from_jacobian",
    "fieldline_rotation_number",
    "perturb_div_free",
    "richardson_ratio",
    "synthetic_nested_field",
]
