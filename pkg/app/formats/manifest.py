"""Run manifests and tabular CSV logs."""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from app.config import RunConfig, SolverConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CONVERGENCE_HEADER = ("iter", "err", "lambda", "twist", "min_divisor")


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (tuple, set)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__} into a manifest")


class ManifestEncoder:
    """Encoder for run manifests."""

    @staticmethod
    def encode(manifest: dict[str, Any]) -> str:
        """JSON with sorted keys and a trailing newline."""
        return json.dumps(manifest, sort_keys=True, indent=2, default=_jsonable) + "\n"


def build_manifest(
    subcommand: str,
    config: RunConfig,
    residuals: dict[str, float],
    scalars: dict[str, Any],
) -> dict[str, Any]:
    """Collect everything a run records about itself."""
    return {
        "subcommand": subcommand,
        "config_digest": config.digest(),
        "tolerances": SolverConfig.snapshot(),
        "residuals": dict(residuals),
        "scalars": dict(scalars),
    }


def write_manifest(out_dir: Path, manifest: dict[str, Any]) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ManifestEncoder.encode(manifest))
    logger.info(f"Manifest written to {path}")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a plain CSV table with ``repr`` floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_convergence(path: Path, history: Iterable[Sequence[Any]]) -> Path:
    """Convergence log with columns iter, err, lambda, twist, min_divisor."""
    return write_rows(path, CONVERGENCE_HEADER, history)
