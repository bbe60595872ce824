"""Command dispatch - maps subcommand outcomes to process exit codes."""

import logging
from pathlib import Path
from typing import Optional

from .commands import CommandRegistry
from .config import RunConfig, load_run_config
from .exceptions import PyBeltramiError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1

# command-line flag -> [run] key
FLAG_KEYS = {
    "out": "out",
    "grid": "grid",
    "tol": "tol",
    "seed": "seed",
    "max_iter": "max_iter",
}


def exit_code_for(error: BaseException) -> int:
    """
    Exit code of a failed run.

    Library errors carry their own code; a bare ValueError (bad argument,
    unknown command) and OSError count as I/O problems.
    """
    return int(getattr(error, "exit_code", EXIT_IO))


def build_config(config_path: Optional[Path], overrides: dict[str, Optional[str]]) -> RunConfig:
    """
    Load the run file and apply command-line overrides on top.

    Args:
        config_path: Run configuration file, or None
        overrides: Flag values as text, keyed like :data:`FLAG_KEYS`; None means unset
    """
    config = load_run_config(config_path)
    for flag, key in FLAG_KEYS.items():
        text = overrides.get(flag)
        if text is not None:
            config.set("run", key, str(text))
    return config


def execute_command(
    command_name: str,
    config_path: Optional[Path] = None,
    overrides: Optional[dict[str, Optional[str]]] = None,
) -> int:
    """
    Run one subcommand and report how it ended.

    Args:
        command_name: Registered subcommand name
        config_path: Run configuration file
        overrides: Command-line flag values

    Returns:
        0 on success, otherwise the exit code of the failure
    """
    try:
        command = CommandRegistry.get(command_name)
        config = build_config(config_path, overrides or {})
        logger.info(f"[Handler] {command.name} (config digest {config.digest()[:12]})")
        manifest = command.execute(config)
    except (PyBeltramiError, ValueError, OSError) as e:
        code = exit_code_for(e)
        logger.error(f"[Handler] {command_name} failed with exit code {code}: {e}")
        k = getattr(e, "k", None)
        if k is not None:
            logger.error(f"[Handler] violating mode k={k}")
        return code

    logger.info(f"[Handler] {command_name} finished, manifest at {manifest}")
    return EXIT_OK
