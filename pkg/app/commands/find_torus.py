"""find-torus command implementation."""

from pathlib import Path

from app.config import RunConfig
from app.formats import write_array, write_convergence
from app.kam import convergence_order, run_newton

from .base import BaseCommand
from .inputs import certify_frequency, load_field, load_torus


class FindTorusCommand(BaseCommand):
    """
    Converge an invariant torus with a fixed frequency direction.

    Keys: [field], [torus] source/s/path, [frequency], [run] tol/max_iter
    """

    @property
    def name(self) -> str:
        return "find-torus"

    def execute(self, config: RunConfig) -> Path:
        field, family = load_field(config)
        K0, omega = load_torus(config, family)
        frequency = certify_frequency(config, omega)

        state = run_newton(
            K0,
            frequency,
            field,
            tol=config.get("run", "tol"),
            max_iter=config.get("run", "max_iter"),
        )

        out = config.out_dir
        write_array(out / "torus", state.K.K, {"omega": state.frequency(frequency)})
        write_convergence(out / "convergence.csv", state.history)
        return self.finish(
            config,
            {"invariance": state.err, "doubled_grid": state.verified_err},
            {
                "iterations": state.iteration,
                "scale": state.scale,
                "twist": state.twist,
                "omega": state.frequency(frequency),
                "convergence_order": convergence_order(state.history),
                "grid": list(state.K.grid),
            },
        )
