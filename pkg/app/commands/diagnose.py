"""diagnose command implementation."""

import logging
from pathlib import Path

import numpy as np

from app.config import RunConfig
from app.exceptions import DegenerateAlpha, LeftNeighborhood
from app.fields import fieldline_rotation_number
from app.torus_geom import (
    invariance_error,
    nondeg_type_I,
    nondeg_type_II,
    normal_transport_defect,
    solvability_average,
    twist_data,
)

from .base import BaseCommand
from .inputs import load_field, load_torus

logger = logging.getLogger(__name__)

_TRACE_TURNS = 20


class DiagnoseCommand(BaseCommand):
    """
    Report twist, type-I and type-II values and the traced rotation of a torus.

    Keys: [field], [torus]; [ck] lam sets the factor for the type-II value
    """

    @property
    def name(self) -> str:
        return "diagnose"

    def execute(self, config: RunConfig) -> Path:
        field, family = load_field(config)
        K, omega = load_torus(config, family)
        lam = config.get("ck", "lam", 0.0)

        error = invariance_error(K, omega, field)
        _, twist = twist_data(K, omega, field)
        _, det_m = nondeg_type_I(K, omega)
        try:
            type_ii = nondeg_type_II(K, omega, field, lam, normalized=True)
        except DegenerateAlpha as e:
            logger.warning(f"[diagnose] type-II value unavailable: {e}")
            type_ii = float("nan")

        t_max = 2 * np.pi * _TRACE_TURNS / abs(omega[0])
        try:
            estimate = fieldline_rotation_number(field, K, t_max)
            rotation, rotation_error = estimate.ratio, estimate.error
        except LeftNeighborhood as e:
            logger.warning(f"[diagnose] field-line oracle unavailable: {e}")
            rotation, rotation_error = float("nan"), float("nan")

        residuals = {
            "invariance": error.sup_norm(),
            "solvability": abs(solvability_average(K, error)),
            "normal_transport": normal_transport_defect(K, omega, field).sup_norm(),
        }
        return self.finish(
            config,
            residuals,
            {
                "omega": omega,
                "ratio": float(omega[1] / omega[0]),
                "twist": twist,
                "det_M": det_m,
                "type_II": type_ii,
                "traced_ratio": rotation,
                "traced_ratio_error": rotation_error,
            },
        )
