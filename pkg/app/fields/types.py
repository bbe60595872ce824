"""Field kinds and serializable field descriptors."""

from dataclasses import dataclass
from enum import Enum
from typing import Any

from app.exceptions import ConfigError


class FieldKind(Enum):
    """Enum for the ambient field constructions."""

    SYNTHETIC = "synthetic"
    PERTURBED = "perturbed"


@dataclass(frozen=True)
class FieldDescriptor:
    """
    Plain description of an ambient field, as written in the ``[field]`` section.

    Attributes:
        kind: Construction to use
        major_radius: Ring radius R of the nested tori
        omega1: Polynomial coefficients of ω₁(s) in increasing degree
        omega2: Polynomial coefficients of ω₂(s) in increasing degree
        s_min: Smallest minor radius in the family
        s_max: Largest minor radius in the family
        delta: Perturbation amplitude (PERTURBED only)
        seed: Seed of the perturbation potential
        modes: Number of Fourier modes in the perturbation potential
    """

    kind: FieldKind = FieldKind.SYNTHETIC
    major_radius: float = 2.0
    omega1: tuple[float, ...] = (1.0,)
    omega2: tuple[float, ...] = (0.3,)
    s_min: float = 0.05
    s_max: float = 0.6
    delta: float = 0.0
    seed: int = 0
    modes: int = 6

    @classmethod
    def from_section(cls, section: dict[str, Any]) -> "FieldDescriptor":
        """
        Build a descriptor from a parsed ``[field]`` config section.

        Raises:
            ConfigError: If the kind is unknown
        """
        values = dict(section)
        kind_text = values.pop("kind", FieldKind.SYNTHETIC.value)
        try:
            kind = kind_text if isinstance(kind_text, FieldKind) else FieldKind(kind_text)
        except ValueError as e:
            raise ConfigError(f"unknown field kind '{kind_text}'") from e
        return cls(kind=kind, **values)

    def to_dict(self) -> dict[str, Any]:
        """Manifest form of the descriptor."""
        return {
            "kind": self.kind.value,
            "major_radius": self.major_radius,
            "omega1": list(self.omega1),
            "omega2": list(self.omega2),
            "s_min": self.s_min,
            "s_max": self.s_max,
            "delta": self.delta,
            "seed": self.seed,
            "modes": self.modes,
        }
