"""hj-solve command implementation."""

from pathlib import Path

import numpy as np

from app.config import RunConfig, SolverConfig
from app.formats import write_array, write_rows
from app.hj import (
    closedness_residual,
    conjugacy_residual,
    norm_residual,
    normalize_datum,
    normalized_jump,
    physical_jump,
    sheared_flat_metric,
    solve_hj,
)
from app.torus_geom import nondeg_type_I

from .base import BaseCommand
from .inputs import load_field, load_torus


class HjSolveCommand(BaseCommand):
    """
    Solve the interface problem |X|² = (1+b)|Y|² + c for a linear datum Y.

    Keys: [hj] c; either [hj] amplitude (sheared flat metric, unit [frequency]
    omega) or a torus from [torus] and [field]
    """

    @property
    def name(self) -> str:
        return "hj-solve"

    def execute(self, config: RunConfig) -> Path:
        self.validate_config(config, ("hj", "c"))
        c = config.get("hj", "c")
        amplitude = config.get("hj", "amplitude")
        if amplitude is not None:
            omega = np.asarray(config.get("frequency", "omega", (1.0, 0.5 * (np.sqrt(5) - 1))))
            omega = omega / np.linalg.norm(omega)
            G = sheared_flat_metric(omega, amplitude, config.grid)
            sigma, w_hat, c_hat = 1.0, omega, c
        else:
            _, family = load_field(config)
            K, omega = load_torus(config, family)
            G = K.G
            sigma, w_hat = normalize_datum(G, omega)
            c_hat = normalized_jump(c, sigma)

        tol = config.get("run", "tol") or SolverConfig.hj().tol
        state, X = solve_hj(c_hat, G, w_hat, tol=tol, max_iter=config.get("run", "max_iter"))

        out = config.out_dir
        meta = {"c": c, "b": state.b, "sigma": sigma}
        write_array(out / "X", X / sigma, meta)
        write_array(out / "H", state.H / sigma, meta)
        write_array(out / "v", state.v, meta)
        write_rows(out / "residual_history.csv", ("iter", "residual"), enumerate(state.history))

        residuals = {
            "norm": norm_residual(state, G, w_hat),
            "conjugacy": conjugacy_residual(state, G, w_hat),
            "closedness": closedness_residual(state.covector(G, w_hat)),
        }
        self.check_residuals(residuals, dict.fromkeys(residuals, 10 * tol))
        _, det_m = nondeg_type_I(G, w_hat)
        return self.finish(
            config,
            residuals,
            {
                "a": state.a / sigma,
                "b": state.b,
                "c": physical_jump(c_hat, sigma),
                "c_normalized": c_hat,
                "sigma": sigma,
                "speed": state.speed,
                "det_M": det_m,
                "iterations": state.iteration,
            },
        )
