"""Builders that turn run-configuration sections into solver inputs."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from app.config import RunConfig
from app.equilibria import GOLDEN_RATIO, Seed, synthetic_beltrami_seed
from app.exceptions import ConfigError
from app.fields import AmbientField, FieldDescriptor, NestedFamily, build_field
from app.formats import read_array
from app.smalldiv import Frequency2, certify
from app.torus_geom import Embedding

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 1e-3
DEFAULT_TAU = 1.5
DEFAULT_K_MAX = 40
DEFAULT_MINOR_RADIUS = 0.3


def load_field(config: RunConfig) -> tuple[AmbientField, NestedFamily]:
    """
    Ambient field from the ``[field]`` section.

    The ``[run]`` seed is used for the perturbation when ``[field]`` has none.
    """
    section = dict(config.sections.get("field", {}))
    if "seed" not in section and config.get("run", "seed") is not None:
        section["seed"] = config.get("run", "seed")
    return build_field(FieldDescriptor.from_section(section))


def certify_frequency(config: RunConfig, omega) -> Frequency2:
    """Certify ω with the ``[frequency]`` constants."""
    return certify(
        omega,
        config.get("frequency", "gamma", DEFAULT_GAMMA),
        config.get("frequency", "tau", DEFAULT_TAU),
        config.get("frequency", "k_max", DEFAULT_K_MAX),
    )


def load_torus(config: RunConfig, family: Optional[NestedFamily]) -> tuple[Embedding, np.ndarray]:
    """
    Starting torus and its frequency from ``[torus]`` and ``[frequency]``.

    ``source = family`` (the default) takes the torus of minor radius ``s``
    from the nested family with the family frequency; ``source = file``
    reads three coefficient files from ``path`` and needs ``[frequency] omega``.

    Raises:
        ConfigError: On an unknown source or a missing key
    """
    source = config.get("torus", "source", "family")
    omega = config.get("frequency", "omega")
    if source == "family":
        if family is None:
            raise ConfigError("[torus] source = family needs a [field] section")
        s = config.get("torus", "s")
        if s is None:
            raise ConfigError("missing [torus] s")
        K = family.embedding(s, config.grid)
        if omega is None:
            omega = family.frequency(s)
    elif source == "file":
        path = config.get("torus", "path")
        if path is None:
            raise ConfigError("missing [torus] path")
        values, _ = read_array(Path(path), (3,))
        K = Embedding(values.resize(config.grid))
        if omega is None:
            raise ConfigError("[torus] source = file needs [frequency] omega")
    else:
        raise ConfigError(f"unknown torus source '{source}'")
    return K, np.asarray(omega, dtype=float)


def load_seed(config: RunConfig, lam: Optional[float] = None) -> Seed:
    """Synthetic Beltrami seed from the ``[equilibrium]`` geometry keys."""
    lambdas = config.get("equilibrium", "lambdas", (0.5,))
    return synthetic_beltrami_seed(
        major_radius=config.get("equilibrium", "major_radius", 3.0),
        minor_radius=config.get("equilibrium", "minor_radius", DEFAULT_MINOR_RADIUS),
        ratio=config.get("equilibrium", "ratio", GOLDEN_RATIO),
        lam=lambdas[0] if lam is None else lam,
        order=config.get("equilibrium", "order"),
        grid=config.grid,
        gamma=config.get("frequency", "gamma", DEFAULT_GAMMA),
        tau=config.get("frequency", "tau", DEFAULT_TAU),
        k_max=config.get("frequency", "k_max", DEFAULT_K_MAX),
    )
