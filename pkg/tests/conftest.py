"""Pytest configuration and fixtures."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from app.config import SolverConfig  # noqa: E402


@pytest.fixture(autouse=True)
def reset_solver_config():
    """Reset tolerance overrides before and after each test."""
    SolverConfig.reset()
    yield
    SolverConfig.reset()


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240611)
