"""continue-family command implementation."""

from pathlib import Path

import numpy as np

from app.config import RunConfig
from app.formats import write_array, write_convergence, write_rows
from app.kam import continue_family

from .base import BaseCommand
from .inputs import certify_frequency, load_field, load_torus

FAMILY_HEADER = (
    "ratio", "ok", "side", "predicted_side", "err", "scale", "twist", "separation", "error"
)


class ContinueFamilyCommand(BaseCommand):
    """
    Converge one torus per target rotation ratio, starting from a common torus.

    Keys: [family] ratios (workers optional), plus the find-torus keys
    """

    @property
    def name(self) -> str:
        return "continue-family"

    def execute(self, config: RunConfig) -> Path:
        self.validate_config(config, ("family", "ratios"))
        field, family = load_field(config)
        K0, omega = load_torus(config, family)
        targets = [
            certify_frequency(config, (omega[0], omega[0] * ratio))
            for ratio in config.get("family", "ratios")
        ]

        members = continue_family(
            K0,
            omega,
            field,
            targets,
            tol=config.get("run", "tol"),
            max_iter=config.get("run", "max_iter"),
            workers=config.get("family", "workers"),
        )

        out = config.out_dir
        rows = []
        for i, member in enumerate(members):
            if member.ok:
                state = member.state
                write_array(out / f"member_{i}", state.K.K, {"ratio": member.target.ratio})
                write_convergence(out / f"member_{i}_convergence.csv", state.history)
                row = (member.target.ratio, 1, member.side, member.predicted_side)
                rows.append(row + (state.err, state.scale, state.twist, member.separation, ""))
            else:
                nan = float("nan")
                row = (member.target.ratio, 0, 0, member.predicted_side)
                rows.append(row + (nan, nan, nan, nan, type(member.error).__name__))
        write_rows(out / "family.csv", FAMILY_HEADER, rows)

        residuals = {f"invariance_{i}": m.state.err for i, m in enumerate(members) if m.ok}
        gaps = [m.separation for m in members if m.ok and np.isfinite(m.separation)]
        if gaps:
            residuals["min_separation"] = min(gaps)
        manifest = self.finish(
            config,
            residuals,
            {
                "ratios": [m.target.ratio for m in members],
                "converged": sum(m.ok for m in members),
                "sides": [m.side for m in members],
            },
        )
        failed = [m for m in members if not m.ok]
        if failed:
            raise failed[0].error
        return manifest
