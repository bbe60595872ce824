"""Unit tests for the command registry, the base command and input builders."""

import json

import numpy as np
import pytest

from app.commands import CommandRegistry, FindTorusCommand, SolveCohomCommand
from app.commands.inputs import certify_frequency, load_field, load_torus
from app.config import RunConfig
from app.exceptions import ConfigError, NotDiophantineUpToCutoff, ResidualAboveTolerance
from app.formats import write_array
from tests.helpers import GOLDEN

SUBCOMMANDS = [
    "build-equilibrium",
    "build-force-free",
    "build-free-boundary",
    "ck-extend",
    "continue-family",
    "diagnose",
    "find-torus",
    "hj-solve",
    "solve-cohom",
]


def run_config(text_sections: dict[str, dict[str, str]]) -> RunConfig:
    config = RunConfig()
    for section, values in text_sections.items():
        for key, text in values.items():
            config.set(section, key, text)
    return config


class TestCommandRegistry:
    """Registration and lookup."""

    def test_all_commands(self):
        """Every subcommand is registered, sorted by name."""
        assert CommandRegistry.get_all_commands() == SUBCOMMANDS

    def test_lookup_is_case_insensitive(self):
        """Names are matched without case."""
        assert isinstance(CommandRegistry.get("Find-Torus"), FindTorusCommand)

    def test_unknown_command(self):
        """Unknown names raise ValueError."""
        with pytest.raises(ValueError, match="unknown command 'nope'"):
            CommandRegistry.get("nope")

    def test_descriptions(self):
        """Help text is the first docstring line."""
        assert SolveCohomCommand().description == "Solve L_ω u = f for a scalar coefficient file."
        for name in SUBCOMMANDS:
            assert CommandRegistry.get(name).description


class TestBaseCommand:
    """Shared helpers of the base class."""

    def test_validate_config(self):
        """The first missing key is named with the subcommand."""
        command = SolveCohomCommand()
        config = run_config({"frequency": {"omega": "1.0, 0.6"}})
        with pytest.raises(ConfigError, match=r"missing \[cohom\] input for 'solve-cohom'"):
            command.validate_config(config, ("frequency", "omega"), ("cohom", "input"))

    def test_check_residuals(self):
        """Residuals at or above tolerance fail; NaN fails too."""
        command = SolveCohomCommand()
        command.check_residuals({"a": 1e-12, "b": 1.0}, {"a": 1e-11})
        with pytest.raises(ResidualAboveTolerance) as info:
            command.check_residuals({"a": 1e-11}, {"a": 1e-11})
        assert info.value.name == "a"
        with pytest.raises(ResidualAboveTolerance):
            command.check_residuals({"a": float("nan")}, {"a": 1.0})

    def test_finish_writes_manifest(self, tmp_path):
        """finish() writes manifest.json into the output directory."""
        config = run_config({"run": {"out": str(tmp_path / "out")}})
        path = SolveCohomCommand().finish(config, {"r": 1e-13}, {"omega": (1.0, GOLDEN)})
        assert path == tmp_path / "out" / "manifest.json"
        data = json.loads(path.read_text())
        assert data["subcommand"] == "solve-cohom"
        assert data["scalars"]["omega"] == [1.0, GOLDEN]

    def test_solve_cohom_execute(self, tmp_path):
        """execute() on a single mode gives the closed-form solution."""
        from app.formats import read_array
        from app.spectral import TorusScalar

        f = TorusScalar.from_function(lambda p1, p2: np.cos(p1 + 2 * p2), (8, 8))
        write_array(tmp_path / "f", f)
        config = run_config(
            {
                "run": {"out": str(tmp_path / "out")},
                "cohom": {"input": str(tmp_path / "f")},
                "frequency": {"omega": f"1.0, {GOLDEN!r}"},
            }
        )
        SolveCohomCommand().execute(config)
        u, metadata = read_array(tmp_path / "out" / "solution")
        # ω·∂ sin(φ₁ + 2φ₂) = (1 + 2γ) cos(φ₁ + 2φ₂)
        expected = TorusScalar.from_function(
            lambda p1, p2: np.sin(p1 + 2 * p2) / (1 + 2 * GOLDEN), (8, 8)
        )
        assert np.allclose(u.values(), expected.values(), atol=1e-13)
        assert metadata["omega"].startswith("1.0,")


class TestInputs:
    """Run sections to solver inputs."""

    def test_family_torus(self):
        """The family torus comes with the family frequency."""
        config = run_config(
            {"field": {"major_radius": "3.0", "omega2": "0.5, 0.4"}, "torus": {"s": "0.25"}}
        )
        field, family = load_field(config)
        K, omega = load_torus(config, family)
        assert K.grid == (32, 32)
        assert np.allclose(omega, [1.0, 0.6])

    def test_frequency_override(self):
        """[frequency] omega replaces the family frequency."""
        config = run_config(
            {"torus": {"s": "0.25"}, "frequency": {"omega": f"1.0, {GOLDEN!r}"}}
        )
        _, family = load_field(config)
        _, omega = load_torus(config, family)
        assert np.allclose(omega, [1.0, GOLDEN])

    def test_missing_radius(self):
        """Family tori need s."""
        config = RunConfig()
        _, family = load_field(config)
        with pytest.raises(ConfigError, match=r"missing \[torus\] s"):
            load_torus(config, family)

    def test_unknown_source(self):
        """Only family and file sources exist."""
        config = run_config({"torus": {"source": "magic"}})
        with pytest.raises(ConfigError, match="unknown torus source 'magic'"):
            load_torus(config, None)

    def test_file_source_needs_frequency(self, tmp_path):
        """Tori read from files carry no frequency of their own."""
        _, family = load_field(run_config({"field": {"major_radius": "3.0"}}))
        write_array(tmp_path / "K", family.embedding(0.2, (16, 16)).K)
        config = run_config({"torus": {"source": "file", "path": str(tmp_path / "K")}})
        with pytest.raises(ConfigError, match="needs \\[frequency\\] omega"):
            load_torus(config, None)

    def test_file_source(self, tmp_path):
        """A torus file is read and resized to the run grid."""
        _, family = load_field(run_config({"field": {"major_radius": "3.0"}}))
        original = family.embedding(0.2, (16, 16))
        write_array(tmp_path / "K", original.K)
        config = run_config(
            {
                "run": {"grid": "32x32"},
                "torus": {"source": "file", "path": str(tmp_path / "K")},
                "frequency": {"omega": "1.0, 0.3"},
            }
        )
        K, omega = load_torus(config, None)
        assert K.grid == (32, 32)
        assert K.enclosed_volume == pytest.approx(original.enclosed_volume, rel=1e-8)
        assert np.allclose(omega, [1.0, 0.3])

    def test_run_seed_reaches_the_field(self):
        """[run] seed is the perturbation seed unless [field] sets one."""
        config = run_config(
            {"run": {"seed": "7"}, "field": {"kind": "perturbed", "delta": "0.01"}}
        )
        same = run_config({"field": {"kind": "perturbed", "delta": "0.01", "seed": "7"}})
        other = run_config({"field": {"kind": "perturbed", "delta": "0.01", "seed": "8"}})
        points = np.array([[2.2, 0.1, 0.05], [-1.8, 0.4, -0.1]])
        values = load_field(config)[0].evaluate(points)
        assert np.array_equal(values, load_field(same)[0].evaluate(points))
        assert not np.allclose(values, load_field(other)[0].evaluate(points))

    def test_certify_frequency(self):
        """Defaults reject rational frequencies."""
        frequency = certify_frequency(RunConfig(), (1.0, GOLDEN))
        assert frequency.gamma == 1e-3
        with pytest.raises(NotDiophantineUpToCutoff):
            certify_frequency(RunConfig(), (1.0, 0.5))
