"""
Command registry - Auto-discovers and registers all subcommands.

This module provides a central registry for the pybeltrami CLI.
"""

from pathlib import Path

from app.config import RunConfig

from .base import BaseCommand
from .ck_extend import CkExtendCommand
from .continue_family import ContinueFamilyCommand
from .diagnose import DiagnoseCommand
from .equilibrium import BuildEquilibriumCommand, BuildForceFreeCommand, BuildFreeBoundaryCommand
from .find_torus import FindTorusCommand
from .hj_solve import HjSolveCommand
from .solve_cohom import SolveCohomCommand


class CommandRegistry:
    """Central registry for all subcommands."""

    _commands: dict[str, type[BaseCommand]] = {}

    @classmethod
    def register(cls, command_class: type[BaseCommand]) -> None:
        """
        Register a command class.

        Args:
            command_class: Command class to register
        """
        instance = command_class()
        cls._commands[instance.name.lower()] = command_class

    @classmethod
    def get(cls, command_name: str) -> BaseCommand:
        """
        Instantiate a command by name.

        Raises:
            ValueError: If command is unknown
        """
        command_class = cls._commands.get(command_name.lower())
        if command_class is None:
            raise ValueError(f"unknown command '{command_name}'")
        return command_class()

    @classmethod
    def execute(cls, command_name: str, config: RunConfig) -> Path:
        """
        Execute a command by name.

        Returns:
            Path of the manifest written by the command
        """
        return cls.get(command_name).execute(config)

    @classmethod
    def get_all_commands(cls) -> list[str]:
        """Get list of all registered command names."""
        return sorted(cls._commands.keys())


# Auto-register all commands
CommandRegistry.register(SolveCohomCommand)
CommandRegistry.register(FindTorusCommand)
CommandRegistry.register(ContinueFamilyCommand)
CommandRegistry.register(HjSolveCommand)
CommandRegistry.register(CkExtendCommand)
CommandRegistry.register(BuildEquilibriumCommand)
CommandRegistry.register(BuildFreeBoundaryCommand)
CommandRegistry.register(BuildForceFreeCommand)
CommandRegistry.register(DiagnoseCommand)


__all__ = [
    "CommandRegistry",
    "BaseCommand",
    "SolveCohomCommand",
    "FindTorusCommand",
    "ContinueFamilyCommand",
    "HjSolveCommand",
    "CkExtendCommand",
    "BuildEquilibriumCommand",
    "BuildFreeBoundaryCommand",
    "BuildForceFreeCommand",
    "DiagnoseCommand",
]
