"""Output formats - coefficient CSV, manifests and tables."""

from .coefficients import (
    CoefficientEncoder,
    CoefficientParser,
    component_paths,
    read_array,
    write_array,
)
from .manifest import (
    ManifestEncoder,
    build_manifest,
    write_convergence,
    write_manifest,
    write_rows,
)

__all__ = [
    "CoefficientEncoder",
    "CoefficientParser",
    "ManifestEncoder",
    "build_manifest",
    "component_paths",
    "read_array",
    "write_array",
    "write_convergence",
    "write_manifest",
    "write_rows",
]
