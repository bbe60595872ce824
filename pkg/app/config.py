"""Solver configuration - tolerance defaults and run configuration files."""

import configparser
import hashlib
import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from .exceptions import ConfigError

logger = logging.getLogger(__name__)


class EquilibriumMode(str, Enum):
    """Kind of equilibrium assembled by the pipeline."""

    STEPPED = "stepped"
    FREE_BOUNDARY = "free_boundary"
    FORCE_FREE = "force_free"


@dataclass(frozen=True)
class SpectralTolerances:
    """Fourier calculus settings."""

    inverse_tol: float = 1e-11
    inverse_max_iter: int = 200
    # ρ·(N₁/2 + N₂/2) must stay below this in strip_norm
    overflow_guard: float = 700.0
    tail_threshold: float = 1e-10


@dataclass(frozen=True)
class SmallDivisorTolerances:
    """Cohomological equation settings."""

    mean_tol: float = 1e-12
    divisor_floor: float = 1e-8
    weight_floor: float = 1e-10


@dataclass(frozen=True)
class KamTolerances:
    """Newton iteration for invariant tori."""

    tol: float = 1e-11
    max_iter: int = 20
    twist_floor: float = 1e-8
    roundoff_floor: float = 1e-13
    solvability_tol: float = 1e-9
    max_refinements: int = 1
    workers: int = 4
    # family members closer than this are reported
    separation_floor: float = 1e-9


@dataclass(frozen=True)
class TracingTolerances:
    """Field-line integration oracle."""

    rtol: float = 1e-11
    atol: float = 1e-12
    drift_tol: float = 1e-6
    samples_per_turn: int = 64


@dataclass(frozen=True)
class HjTolerances:
    """Hamilton–Jacobi Newton scheme."""

    tol: float = 1e-10
    max_iter: int = 20
    c_max: float = 1e-2
    matrix_floor: float = 1e-6


@dataclass(frozen=True)
class JetTolerances:
    """Cauchy–Kovalevskaya jet extension."""

    order: int = 6
    validity_threshold: float = 1e-6
    constraint_tol: float = 1e-10
    focal_fraction: float = 0.5
    locate_tol: float = 1e-13
    locate_max_iter: int = 30


@dataclass(frozen=True)
class EquilibriumTolerances:
    """Layer assembly and weak-solution checks."""

    jump_tol: float = 1e-8
    continuity_tol: float = 1e-9
    lambda_gap_factor: float = 0.05
    kam_tol: float = 1e-10
    # jet fields support invariance only down to about this level
    kam_floor: float = 1e-8
    layer_jet_threshold: float = 1e-10
    step_fraction: float = 0.8
    type2_floor: float = 1e-6
    det_floor: float = 1e-6
    boundary_pressure: float = 0.0
    order: int = 8
    target_attempts: int = 12
    step_retries: int = 3


_SECTIONS: dict[str, type] = {
    "spectral": SpectralTolerances,
    "smalldiv": SmallDivisorTolerances,
    "kam": KamTolerances,
    "tracing": TracingTolerances,
    "hj": HjTolerances,
    "jet": JetTolerances,
    "equilibria": EquilibriumTolerances,
}


class SolverConfig:
    """
    Global solver configuration singleton.

    Holds the tolerance defaults of every numerical module. Modules read their
    section through the class getters; runs override values from the config file.
    """

    _instance: Optional["SolverConfig"] = None
    _sections: dict[str, Any]

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._sections = {name: kind() for name, kind in _SECTIONS.items()}
        return cls._instance

    @classmethod
    def initialize(cls, **sections: Any) -> None:
        """
        Initialize the configuration with explicit section objects.

        Args:
            **sections: Section name mapped to a tolerance dataclass instance
        """
        instance = cls()
        for name, value in sections.items():
            if name not in _SECTIONS:
                raise ConfigError(f"unknown tolerance section '{name}'")
            if not isinstance(value, _SECTIONS[name]):
                raise ConfigError(f"section '{name}' expects {_SECTIONS[name].__name__}")
            instance._sections[name] = value

    @classmethod
    def override(cls, section: str, **values: Any) -> None:
        """
        Replace individual values of one section.

        Args:
            section: Section name (e.g. "kam")
            **values: Field names and new values

        Raises:
            ConfigError: If the section or a field is unknown
        """
        instance = cls()
        if section not in _SECTIONS:
            raise ConfigError(f"unknown tolerance section '{section}'")
        known = {f.name for f in fields(_SECTIONS[section])}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        instance._sections[section] = replace(instance._sections[section], **values)
        logger.debug(f"[Config] {section} overridden: {values}")

    @classmethod
    def get(cls, section: str) -> Any:
        """Return the dataclass of one section."""
        return cls()._sections[section]

    @classmethod
    def spectral(cls) -> SpectralTolerances:
        return cls.get("spectral")

    @classmethod
    def smalldiv(cls) -> SmallDivisorTolerances:
        return cls.get("smalldiv")

    @classmethod
    def kam(cls) -> KamTolerances:
        return cls.get("kam")

    @classmethod
    def tracing(cls) -> TracingTolerances:
        return cls.get("tracing")

    @classmethod
    def hj(cls) -> HjTolerances:
        return cls.get("hj")

    @classmethod
    def jet(cls) -> JetTolerances:
        return cls.get("jet")

    @classmethod
    def equilibria(cls) -> EquilibriumTolerances:
        return cls.get("equilibria")

    @classmethod
    def snapshot(cls) -> dict[str, dict[str, Any]]:
        """Plain-dict copy of every section, for manifests."""
        instance = cls()
        return {
            name: {f.name: getattr(value, f.name) for f in fields(value)}
            for name, value in sorted(instance._sections.items())
        }

    @classmethod
    def reset(cls) -> None:
        """Reset configuration to defaults (useful for testing)."""
        cls._instance = None


# Run configuration schema: section -> key -> parser
def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in text.replace(";", ",").split(",") if item.strip())


def _grid(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid must look like N1xN2, got '{text}'")
    n1, n2 = int(parts[0]), int(parts[1])
    if n1 <= 0 or n2 <= 0 or n1 % 2 or n2 % 2:
        raise ValueError(f"grid sizes must be positive and even, got {n1}x{n2}")
    return n1, n2


RUN_SCHEMA: dict[str, dict[str, Any]] = {
    "run": {"out": str, "grid": _grid, "tol": float, "seed": int, "max_iter": int},
    "field": {
        "kind": str,
        "major_radius": float,
        "omega1": _floats,
        "omega2": _floats,
        "s_min": float,
        "s_max": float,
        "delta": float,
        "seed": int,
        "modes": int,
    },
    "torus": {"source": str, "s": float, "path": str},
    "frequency": {"omega": _floats, "gamma": float, "tau": float, "k_max": int},
    "cohom": {"input": str},
    "family": {"ratios": _floats, "workers": int},
    "hj": {"c": float, "amplitude": float},
    "ck": {"lam": float, "order": int, "t_max": float},
    "equilibrium": {
        "mode": EquilibriumMode,
        "major_radius": float,
        "minor_radius": float,
        "ratio": float,
        "lambdas": _floats,
        "jumps": _floats,
        "order": int,
        "p_boundary": float,
    },
}


@dataclass
class RunConfig:
    """Parsed run configuration: run-file sections plus tolerance overrides."""

    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """Look up a parsed value with a default."""
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> Any:
        """Look up a mandatory value."""
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"missing required key '{key}' in [{section}]")
        return value

    def set(self, section: str, key: str, text: str) -> None:
        """Set a value from text, as a command-line flag does."""
        if not _is_run_key(section, key):
            raise ConfigError(f"unknown key '{key}' in [{section}]")
        self.raw.setdefault(section, {})[key] = text
        self.sections.setdefault(section, {})[key] = _parse_value(section, key, text)

    def digest(self) -> str:
        """SHA-256 of the canonical sorted key/value dump."""
        lines = [
            f"[{section}] {key}={value}"
            for section in sorted(self.raw)
            for key, value in sorted(self.raw[section].items())
        ]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()

    @property
    def grid(self) -> tuple[int, int]:
        return self.get("run", "grid", (32, 32))

    @property
    def out_dir(self) -> Path:
        return Path(self.get("run", "out", "out"))


def _is_run_key(section: str, key: str) -> bool:
    return key in RUN_SCHEMA.get(section, {})


def _parse_value(section: str, key: str, text: str) -> Any:
    if _is_run_key(section, key):
        parser = RUN_SCHEMA[section][key]
    else:
        kind = _SECTIONS.get(section)
        if kind is None and section not in RUN_SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        types = {f.name: f.type for f in fields(kind)} if kind is not None else {}
        if key not in types:
            raise ConfigError(f"unknown key '{key}' in [{section}]")
        parser = int if types[key] in (int, "int") else float
    try:
        value = parser(text.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for [{section}] {key}: {e}") from e
    if key in ("tol", "gamma") and value <= 0:
        raise ConfigError(f"[{section}] {key} must be positive")
    return value


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """
    Parse a run configuration file.

    Sections named after solver modules (``[kam]``, ``[hj]``, ...) override the
    tolerance defaults in :class:`SolverConfig`; the others describe the run.

    Args:
        path: Config file path, or None for an empty configuration

    Returns:
        Parsed run configuration

    Raises:
        ConfigError: On unknown sections or keys, or unparsable values
    """
    config = RunConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e

    for section in parser.sections():
        for key, text in parser.items(section):
            if _is_run_key(section, key):
                config.set(section, key, text)
            else:
                value = _parse_value(section, key, text)
                SolverConfig.override(section, **{key: value})
                config.raw.setdefault(section, {})[key] = text
    logger.info(f"[Config] loaded {path} (digest {config.digest()[:12]})")
    return config
