"""Plain-text storage for 2-D float grids.

Format: one header line ``<rows> <cols>``, then ``rows`` lines of ``cols``
decimal reals separated by single spaces.  Values are written with
``repr(float)``, which round-trips IEEE doubles exactly, so
``read_grid(write_grid(g))`` reproduces ``g`` bit for bit.
"""

import io
import os

import numpy as np


def format_grid(grid):
    """Render a 2-D float array in the text grid format."""
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {arr.shape}")
    rows, cols = arr.shape
    lines = [f"{rows} {cols}"]
    for r in range(rows):
        lines.append(" ".join(repr(v) for v in arr[r].tolist()))
    return "\n".join(lines) + "\n"


def parse_grid(text):
    """Parse the text grid format back into a float64 array."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty grid text")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"bad grid header: {lines[0]!r}")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ValueError(f"bad grid header: {lines[0]!r}") from exc
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    if len(lines) - 1 != rows:
        raise ValueError(f"expected {rows} data lines, found {len(lines) - 1}")
    out = np.empty((rows, cols), dtype=float)
    for r in range(rows):
        toks = lines[r + 1].split()
        if len(toks) != cols:
            raise ValueError(f"row {r}: expected {cols} values, found {len(toks)}")
        try:
            out[r] = [float(t) for t in toks]
        except ValueError as exc:
            raise ValueError(f"row {r}: unparseable value") from exc
    return out


def write_grid(grid, path):
    """Write a grid to ``path`` (string/PathLike or text file object)."""
    text = format_grid(grid)
    if isinstance(path, (str, os.PathLike)):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        path.write(text)


def read_grid(path):
    """Read a grid from ``path`` (string/PathLike or text file object)."""
    if isinstance(path, (str, os.PathLike)):
        with open(path, "r", encoding="ascii") as fh:
            return parse_grid(fh.read())
    if isinstance(path, io.TextIOBase):
        return parse_grid(path.read())
    return parse_grid(path.read())
