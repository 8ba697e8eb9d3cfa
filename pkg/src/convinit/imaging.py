"""Grayscale rendering of attention maps and plain-text matrix dumps.

Images are binary PGM (P5), one byte per pixel, maxval 255, rows in grid
order. Each pixel is round(255 * entry / row_max), so the brightest pixel of
every row is 255 regardless of how peaked the row is. Matrix dumps are bare
CSV: comma-separated ``%.17e`` scalars, no quoting, one row per line.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from .attention import AttentionMap
from .gridconv import ConvMatrix
from .linalg import ShapeError, as_matrix, ensure_finite

PGM_MAXVAL = 255

Renderable = Union[AttentionMap, ConvMatrix, np.ndarray]


def attention_pixels(amap: Renderable) -> np.ndarray:
    """uint8 pixel grid for a square mixing matrix, row-max normalized."""
    if isinstance(amap, (AttentionMap, ConvMatrix)):
        m = amap.matrix
    else:
        m = ensure_finite(as_matrix(amap, "attention map"), "attention map")
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"attention map must be square, got {m.shape}")
    row_max = m.max(axis=1, keepdims=True)
    if not (row_max > 0).all():
        raise ValueError("every row needs a positive maximum to normalize against")
    scaled = np.rint(PGM_MAXVAL * (m / row_max))
    return np.clip(scaled, 0, PGM_MAXVAL).astype(np.uint8)


def render_attention_pgm(amap: Renderable, path) -> None:
    pixels = attention_pixels(amap)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(pixels.tobytes())


def format_scalar(value: float) -> str:
    return f"{value:.17e}"


def write_matrix_csv(matrix, path) -> None:
    m = ensure_finite(as_matrix(matrix, "matrix"), "matrix")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in m:
            fh.write(",".join(format_scalar(v) for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no rows")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValueError(
                f"{path}: line {lineno} has {len(row)} cells, expected {width}"
            )
    return np.array(rows, dtype=np.float64)
