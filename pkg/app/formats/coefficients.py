"""CSV codec for Fourier coefficients of functions on the torus."""

from pathlib import Path
from typing import Any, Union

import numpy as np

from app.exceptions import IOFormatError
from app.spectral import TorusArray, TorusScalar, wrap

HEADER = "k1,k2,re,im"


def _format_grid(grid: tuple[int, int]) -> str:
    return f"{grid[0]}x{grid[1]}"


def _modes(n: int) -> range:
    half = n // 2
    return range(-(half - 1), half)


class CoefficientEncoder:
    """Encoder for scalar coefficient blocks."""

    @staticmethod
    def encode(f: TorusArray, metadata: Union[dict[str, Any], None] = None) -> str:
        """
        Encode a scalar function as metadata lines plus one row per retained mode.

        Rows run over k1 ascending, then k2 ascending, from −(N/2 − 1) to N/2 − 1.
        Floats are written with ``repr`` so the text is reproducible bit for bit.

        Args:
            f: Scalar function (no component axes)
            metadata: Extra ``key=value`` pairs; keys are written sorted

        Returns:
            CSV text ending with a newline
        """
        if f.shape != ():
            raise ValueError(f"encoder takes one component at a time, got shape {f.shape}")
        meta = {"grid_size": _format_grid(f.grid)}
        for key, value in (metadata or {}).items():
            meta[str(key)] = CoefficientEncoder._format_value(value)

        lines = [f"# {key}={meta[key]}" for key in sorted(meta)]
        lines.append(HEADER)
        n1, n2 = f.grid
        coeffs = f.coeffs
        for k1 in _modes(n1):
            for k2 in _modes(n2):
                c = coeffs[k1 % n1, k2 % n2]
                lines.append(f"{k1},{k2},{float(c.real)!r},{float(c.imag)!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def _format_value(value: Any) -> str:
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        if isinstance(value, (list, tuple, np.ndarray)):
            return ",".join(CoefficientEncoder._format_value(v) for v in value)
        text = str(getattr(value, "value", value))
        if "\n" in text:
            raise ValueError(f"metadata value for a coefficient file spans lines: {text!r}")
        return text


class CoefficientParser:
    """Parser for the coefficient CSV format."""

    @staticmethod
    def parse(text: str) -> tuple[TorusScalar, dict[str, str]]:
        """
        Decode coefficient text.

        Returns:
            (function, metadata) with metadata values left as strings

        Raises:
            IOFormatError: On a missing header, a malformed row or an unknown mode
        """
        metadata: dict[str, str] = {}
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        pos = 0
        while pos < len(lines) and lines[pos].startswith("#"):
            key, sep, value = lines[pos][1:].strip().partition("=")
            if not sep:
                raise IOFormatError(f"metadata line without '=': {lines[pos]!r}")
            metadata[key.strip()] = value.strip()
            pos += 1

        if "grid_size" not in metadata:
            raise IOFormatError("coefficient file has no grid_size")
        grid = CoefficientParser._parse_grid(metadata["grid_size"])
        if pos >= len(lines) or lines[pos] != HEADER:
            raise IOFormatError(f"expected header {HEADER!r}")
        pos += 1

        coeffs = np.zeros(grid, dtype=complex)
        n1, n2 = grid
        for line in lines[pos:]:
            k1, k2, re, im = CoefficientParser._parse_row(line)
            if 2 * abs(k1) >= n1 or 2 * abs(k2) >= n2:
                raise IOFormatError(f"mode ({k1}, {k2}) outside the {n1}x{n2} band")
            coeffs[k1 % n1, k2 % n2] = complex(re, im)
        return TorusScalar(coeffs), metadata

    @staticmethod
    def _parse_grid(text: str) -> tuple[int, int]:
        try:
            n1, n2 = (int(part) for part in text.lower().split("x"))
        except ValueError as e:
            raise IOFormatError(f"bad grid_size {text!r}") from e
        if n1 <= 0 or n2 <= 0 or n1 % 2 or n2 % 2:
            raise IOFormatError(f"grid sizes must be positive and even, got {text!r}")
        return n1, n2

    @staticmethod
    def _parse_row(line: str) -> tuple[int, int, float, float]:
        parts = line.split(",")
        if len(parts) != 4:
            raise IOFormatError(f"expected 4 columns, got {len(parts)}: {line!r}")
        try:
            return int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])
        except ValueError as e:
            raise IOFormatError(f"malformed row {line!r}") from e


def component_paths(stem: Path, shape: tuple[int, ...]) -> list[Path]:
    """File names for each component of an array: ``stem.csv`` or ``stem_<i>.csv``."""
    stem = Path(stem)
    if shape == ():
        return [stem.with_suffix(".csv")]
    count = int(np.prod(shape))
    return [stem.with_name(f"{stem.name}_{i}.csv") for i in range(count)]


def write_array(stem: Path, f: TorusArray, metadata: Union[dict[str, Any], None] = None):
    """
    Write every component of f to its own coefficient file.

    Returns:
        The written paths
    """
    paths = component_paths(stem, f.shape)
    flat = f.coeffs.reshape(-1, *f.grid)
    for i, path in enumerate(paths):
        meta = dict(metadata or {})
        if f.shape:
            meta["component"] = i
            meta["shape"] = "x".join(str(s) for s in f.shape)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(CoefficientEncoder.encode(TorusScalar(flat[i]), meta))
    return paths


def read_array(stem: Path, shape: tuple[int, ...] = ()) -> tuple[TorusArray, dict[str, str]]:
    """
    Read an array written by :func:`write_array`.

    Raises:
        IOFormatError: If a component file is missing or grids disagree
    """
    blocks = []
    metadata: dict[str, str] = {}
    for path in component_paths(stem, shape):
        try:
            text = Path(path).read_text()
        except FileNotFoundError as e:
            raise IOFormatError(f"missing coefficient file {path}") from e
        f, metadata = CoefficientParser.parse(text)
        if blocks and f.grid != blocks[0].shape:
            raise IOFormatError(f"{path} has grid {f.grid}, expected {blocks[0].shape}")
        blocks.append(f.coeffs)
    coeffs = np.stack(blocks).reshape(*shape, *blocks[0].shape)
    return wrap(coeffs), metadata
