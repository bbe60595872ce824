"""Base command interface."""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

from app.config import RunConfig
from app.exceptions import ConfigError, ResidualAboveTolerance
from app.formats import build_manifest, write_manifest

logger = logging.getLogger(__name__)


class BaseCommand(ABC):
    """Abstract base class for all pybeltrami subcommands."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Return the subcommand name (e.g., 'find-torus')."""
        pass

    @property
    def description(self) -> str:
        """One-line help text."""
        lines = (self.__doc__ or "").strip().splitlines()
        return lines[0] if lines else ""

    @abstractmethod
    def execute(self, config: RunConfig) -> Path:
        """
        Run the subcommand.

        Args:
            config: Parsed run configuration with command-line overrides applied

        Returns:
            Path of the written manifest
        """
        pass

    def validate_config(self, config: RunConfig, *keys: tuple[str, str]) -> None:
        """
        Check that mandatory keys are present.

        Raises:
            ConfigError: Naming the first missing key
        """
        for section, key in keys:
            if config.get(section, key) is None:
                raise ConfigError(f"missing [{section}] {key} for '{self.name}' command")

    def check_residuals(self, residuals: dict[str, float], tolerances: dict[str, float]) -> None:
        """
        Compare residuals against their tolerances.

        Raises:
            ResidualAboveTolerance: For the first residual (by name) at or above tolerance
        """
        for name in sorted(tolerances):
            value = residuals[name]
            if not value < tolerances[name]:
                raise ResidualAboveTolerance(name, value, tolerances[name])

    def finish(
        self, config: RunConfig, residuals: dict[str, float], scalars: dict[str, Any]
    ) -> Path:
        """Write the manifest of a run."""
        manifest = build_manifest(self.name, config, residuals, scalars)
        path = write_manifest(config.out_dir, manifest)
        logger.info(f"[{self.name}] done, outputs in {config.out_dir}")
        return path
