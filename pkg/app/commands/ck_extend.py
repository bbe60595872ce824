"""ck-extend command implementation."""

from pathlib import Path

import numpy as np

from app.ck_extend import check_constraint, extend_jet, focal_distance, jet_residuals
from app.config import RunConfig
from app.formats import write_array, write_rows
from app.spectral import TorusVec

from .base import BaseCommand
from .inputs import load_seed, load_torus

_PROFILE_SAMPLES = 24


class CkExtendCommand(BaseCommand):
    """
    Extend a constant tangent datum off a torus as a Beltrami jet.

    Keys: [ck] lam/order/t_max; the torus is the synthetic seed torus unless
    [torus] source = file
    """

    @property
    def name(self) -> str:
        return "ck-extend"

    def execute(self, config: RunConfig) -> Path:
        lam = config.get("ck", "lam", 0.0)
        if config.get("torus", "source") == "file":
            K, omega = load_torus(config, None)
        else:
            seed = load_seed(config, lam=lam)
            K, omega = seed.K, seed.omega
        X = TorusVec.constant(omega, K.grid)

        order, t_max = config.get("ck", "order"), config.get("ck", "t_max")
        jet = extend_jet(K, X, lam, order=order, t_max=t_max)

        out = config.out_dir
        lo, hi = jet.t_range
        for j, coeff in enumerate(jet.coeffs):
            write_array(out / f"jet_order_{j}", coeff, {"order": j, "lam": lam, "t_max": hi})

        # residual profile over the whole chart, for plotting
        rows = []
        for t in np.geomspace(jet.t_cap * 1e-3, jet.t_cap, _PROFILE_SAMPLES):
            curl_res, div_res = jet_residuals(jet, float(t))
            rows.append((float(t), curl_res, div_res))
        write_rows(out / "residual_profile.csv", ("t", "curl", "div"), rows)

        trace = float(np.max(np.abs(jet.trace() - K.push(X.values()))))
        return self.finish(
            config,
            {"constraint": check_constraint(K, X), "trace": trace},
            {
                "order": jet.order,
                "lam": lam,
                "t_range": [lo, hi],
                "t_cap": jet.t_cap,
                "focal_distance": focal_distance(K),
                "omega": omega,
            },
        )
