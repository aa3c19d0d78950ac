"""Plain-text field files (``DBARF1``)."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Union

import numpy as np

from .grid import Field2D, Space, SpectralGrid2D

MAGIC = "DBARF1"
PathLike = Union[str, os.PathLike]


class FieldFormatError(ValueError):
    """Malformed or truncated field file."""


def write_field(path: PathLike, field: Field2D) -> Path:
    """Write ``field`` with a one-line header and one ``re im`` pair per node."""
    g = field.grid
    path = Path(path)
    flat = field.flat
    data = np.column_stack([flat.real, flat.imag])
    header = f"{MAGIC} {g.n_x} {g.n_y} {g.l_x!r} {g.l_y!r} {field.space.value}"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt="%.17g")
    return path


def read_field(path: PathLike) -> Field2D:
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        parts = fh.readline().split()
        if len(parts) != 6 or parts[0] != MAGIC:
            raise FieldFormatError(f"{path}: missing {MAGIC} header")
        try:
            n_x, n_y = int(parts[1]), int(parts[2])
            l_x, l_y = float(parts[3]), float(parts[4])
            space = Space(parts[5])
        except ValueError as exc:
            raise FieldFormatError(f"{path}: bad header {' '.join(parts)!r}") from exc
        data = np.loadtxt(fh, dtype=float, ndmin=2)
    if data.shape != (n_x * n_y, 2):
        raise FieldFormatError(f"{path}: expected {n_x * n_y} rows of 're im', found shape {data.shape}")
    grid = SpectralGrid2D(n_x, n_y, l_x, l_y)
    return Field2D(grid, space, (data[:, 0] + 1j * data[:, 1]).reshape(grid.shape))


__all__ = ["FieldFormatError", "read_field", "write_field"]
