"""Unit tests for command dispatch and exit codes."""

import json
import logging

import pytest

from app.exceptions import (
    ConfigError,
    DivisorUnderflow,
    FocalPoint,
    IOFormatError,
    MaxIterExceeded,
    NonzeroMean,
    TwistTooSmall,
)
from app.formats import write_array
from app.handler import EXIT_IO, EXIT_OK, build_config, execute_command, exit_code_for
from app.main import build_parser, main
from tests.helpers import GOLDEN, trig_scalar, write_config


@pytest.fixture
def cohom_config(tmp_path):
    """Run file for solve-cohom on a 16x16 trigonometric polynomial."""
    write_array(tmp_path / "f", trig_scalar((16, 16)))
    return write_config(
        tmp_path / "run.ini",
        f"""
        [cohom]
        input = {tmp_path / "f"}

        [frequency]
        omega = 1.0, {GOLDEN!r}
        """,
    )


class TestExitCodes:
    """Failure families map to process exit codes."""

    @pytest.mark.parametrize(
        "error, code",
        [
            (IOFormatError("bad file"), 1),
            (ConfigError("missing key"), 1),
            (DivisorUnderflow((1, -2), 1e-16, 1e-13), 2),
            (NonzeroMean(0.1), 2),
            (TwistTooSmall(1e-10, 1e-8), 3),
            (FocalPoint("t beyond focal distance"), 3),
            (MaxIterExceeded(10, 1e-3), 4),
        ],
    )
    def test_library_errors(self, error, code):
        """Library errors carry their own code."""
        assert exit_code_for(error) == code

    def test_plain_errors(self):
        """Bare ValueError and OSError are I/O failures."""
        assert exit_code_for(ValueError("unknown command")) == EXIT_IO
        assert exit_code_for(FileNotFoundError("f.csv")) == EXIT_IO


class TestBuildConfig:
    """Flag overrides on top of the run file."""

    def test_overrides(self, tmp_path):
        """Flags set [run] keys; unset flags leave them alone."""
        config = build_config(None, {"grid": "16x8", "out": str(tmp_path), "tol": None})
        assert config.grid == (16, 8)
        assert config.out_dir == tmp_path
        assert config.get("run", "tol") is None

    def test_flag_wins_over_file(self, tmp_path):
        """The command line overrides the run file."""
        path = write_config(tmp_path / "run.ini", "[run]\ngrid = 32x32\nmax_iter = 5\n")
        config = build_config(path, {"grid": "64x64"})
        assert config.grid == (64, 64)
        assert config.get("run", "max_iter") == 5

    def test_bad_grid(self):
        """Odd grid sizes are configuration errors."""
        with pytest.raises(ConfigError, match="grid"):
            build_config(None, {"grid": "15x16"})


class TestExecuteCommand:
    """Running subcommands through the handler."""

    def test_unknown_command(self):
        """Unknown subcommands exit with 1."""
        assert execute_command("nope") == EXIT_IO

    def test_solve_cohom(self, cohom_config, tmp_path):
        """A Diophantine frequency solves and writes the solution and manifest."""
        out = tmp_path / "out"
        assert execute_command("solve-cohom", cohom_config, {"out": str(out)}) == EXIT_OK
        assert (out / "solution.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "solve-cohom"
        assert manifest["residuals"]["back_substitution"] < 1e-11

    def test_rational_frequency(self, tmp_path, caplog):
        """A resonant ω is a certification failure and the violating mode is logged."""
        path = write_config(
            tmp_path / "run.ini",
            f"""
            [cohom]
            input = {tmp_path / "f"}

            [frequency]
            omega = 1.0, 0.5
            """,
        )
        with caplog.at_level(logging.ERROR, logger="app.handler"):
            code = execute_command("solve-cohom", path, {"out": str(tmp_path / "out")})
        assert code == 2
        assert "violating mode k=" in caplog.text

    def test_missing_key(self, tmp_path):
        """A missing mandatory key exits with 1."""
        path = write_config(tmp_path / "run.ini", "[frequency]\nomega = 1.0, 0.6\n")
        assert execute_command("solve-cohom", path, {"out": str(tmp_path)}) == EXIT_IO

    def test_missing_input_file(self, tmp_path):
        """A missing coefficient file exits with 1."""
        path = write_config(
            tmp_path / "run.ini",
            f"""
            [cohom]
            input = {tmp_path / "absent"}

            [frequency]
            omega = 1.0, {GOLDEN!r}
            """,
        )
        assert execute_command("solve-cohom", path, {"out": str(tmp_path)}) == EXIT_IO


class TestMain:
    """Argument parsing."""

    def test_parser_choices(self):
        """Every registered subcommand is a parser choice."""
        args = build_parser().parse_args(["find-torus", "--grid", "64x64", "--max-iter", "7"])
        assert args.command == "find-torus"
        assert args.grid == "64x64"
        assert args.max_iter == "7"
        assert args.debug is False

    def test_unknown_subcommand(self):
        """argparse rejects unknown subcommands."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["ping"])

    def test_main_runs_subcommand(self, cohom_config, tmp_path):
        """main() returns the handler's exit code."""
        out = tmp_path / "main_out"
        argv = ["solve-cohom", "--config", str(cohom_config), "--out", str(out), "--debug"]
        assert main(argv) == EXIT_OK
        assert (out / "manifest.json").exists()
