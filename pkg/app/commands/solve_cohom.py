"""solve-cohom command implementation."""

from pathlib import Path

from app.config import RunConfig
from app.formats import read_array, write_array
from app.smalldiv import min_grid_divisor, solve_cohomological

from .base import BaseCommand
from .inputs import certify_frequency

# relative back-substitution residual
_RESIDUAL_TOL = 1e-11


class SolveCohomCommand(BaseCommand):
    """
    Solve L_ω u = f for a scalar coefficient file.

    Keys: [cohom] input, [frequency] omega (gamma, tau, k_max optional)
    """

    @property
    def name(self) -> str:
        return "solve-cohom"

    def execute(self, config: RunConfig) -> Path:
        self.validate_config(config, ("cohom", "input"), ("frequency", "omega"))
        frequency = certify_frequency(config, config.get("frequency", "omega"))
        f, metadata = read_array(Path(config.get("cohom", "input")))

        u = solve_cohomological(f, frequency)
        size = f.sup_norm()
        residual = (u.l_omega(frequency) - f).sup_norm() / size if size > 0 else 0.0

        write_array(config.out_dir / "solution", u, dict(metadata, omega=frequency.omega))
        residuals = {"back_substitution": residual}
        self.check_residuals(residuals, {"back_substitution": _RESIDUAL_TOL})
        return self.finish(
            config,
            residuals,
            {
                "omega": frequency.omega,
                "min_divisor": min_grid_divisor(f.grid, frequency),
                "min_weighted_divisor": frequency.min_weighted,
            },
        )
