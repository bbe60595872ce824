"""build-equilibrium, build-free-boundary and build-force-free command implementations."""

from pathlib import Path
from typing import Optional

from app.config import EquilibriumMode, RunConfig
from app.equilibria import (
    build_force_free,
    build_free_boundary,
    build_stepped,
    current_distribution,
    total_pressure_jump,
    write_bundle,
)
from app.formats import build_manifest

from .base import BaseCommand
from .inputs import load_seed


class BuildEquilibriumCommand(BaseCommand):
    """
    Assemble an equilibrium from the synthetic seed and write its bundle.

    Keys: [equilibrium] mode/lambdas/jumps/p_boundary and the seed geometry
    """

    @property
    def name(self) -> str:
        return "build-equilibrium"

    @property
    def mode(self) -> Optional[EquilibriumMode]:
        """Fixed mode, or None to read it from the configuration."""
        return None

    def execute(self, config: RunConfig) -> Path:
        mode = self.mode or config.get("equilibrium", "mode", EquilibriumMode.STEPPED)
        lambdas = list(config.get("equilibrium", "lambdas", (0.5, 1.0)))
        p_boundary = config.get("equilibrium", "p_boundary")
        seed = load_seed(config, lam=lambdas[0])

        if mode == EquilibriumMode.STEPPED:
            self.validate_config(config, ("equilibrium", "jumps"))
            jumps = list(config.get("equilibrium", "jumps"))
            eq = build_stepped(seed, lambdas, jumps, p_boundary=p_boundary)
        elif mode == EquilibriumMode.FORCE_FREE:
            eq = build_force_free(seed, lambdas, p_boundary=p_boundary)
        else:
            eq = build_free_boundary(seed, p_boundary=p_boundary)

        _, sheets = current_distribution(eq)
        scalars = {
            "sheet_magnitude": [sheet.magnitude for sheet in sheets],
            "sheet_normal_part": [sheet.normal_part for sheet in sheets],
            "sheet_divergence": [sheet.divergence for sheet in sheets],
            "total_pressure_jump": [
                total_pressure_jump(eq, k) for k in range(1, len(eq.layers))
            ],
            "seed_type_II": seed.type_II,
        }
        manifest = build_manifest(self.name, config, {}, scalars)
        return write_bundle(eq, config.out_dir, manifest)


class BuildFreeBoundaryCommand(BuildEquilibriumCommand):
    """
    Plasma torus with a harmonic vacuum shell and its confining surface current.

    Keys: the seed geometry in [equilibrium]; lambdas[0] is the plasma factor
    """

    @property
    def name(self) -> str:
        return "build-free-boundary"

    @property
    def mode(self) -> Optional[EquilibriumMode]:
        return EquilibriumMode.FREE_BOUNDARY


class BuildForceFreeCommand(BuildEquilibriumCommand):
    """
    Layers with distinct Beltrami factors and a continuous field.

    Keys: [equilibrium] lambdas and the seed geometry
    """

    @property
    def name(self) -> str:
        return "build-force-free"

    @property
    def mode(self) -> Optional[EquilibriumMode]:
        return EquilibriumMode.FORCE_FREE
