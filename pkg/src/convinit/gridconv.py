"""Convolution matrices on a 2-D patch grid.

A pixel (i, j) of a grid_h x grid_w grid is vectorized to row index
``i * grid_w + j``. Filters are applied as cross-correlation (no kernel
flip): entry (u, v) of an f x f filter, with center c = (f - 1) // 2, reads
the source pixel (i + u - c, j + v - c).

Two boundary policies produce same-size N x N matrices:

``circular``
    Out-of-grid sources wrap modulo the grid. Impulse filters then yield
    exact permutation matrices.

``zero_self_fallback``
    Taps whose source pixel leaves the grid are redirected to the center
    pixel itself, so every row keeps its full coefficient mass and impulse
    rows stay one-hot even at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .rng import SplitMix64

CIRCULAR = "circular"
ZERO_SELF = "zero_self_fallback"
PADDINGS = (CIRCULAR, ZERO_SELF)


def _check_padding(padding: str) -> str:
    if padding not in PADDINGS:
        raise ValueError(f"unknown padding {padding!r}, expected one of {PADDINGS}")
    return padding


def _check_filter_size(f: int) -> int:
    if f < 1 or f % 2 == 0:
        raise ValueError(f"filter size must be odd and >= 1, got {f}")
    return f


@dataclass(frozen=True)
class GridShape:
    grid_h: int
    grid_w: int

    def __post_init__(self):
        if self.grid_h < 1 or self.grid_w < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.grid_h}x{self.grid_w}")

    @property
    def n(self) -> int:
        return self.grid_h * self.grid_w

    def index(self, i: int, j: int) -> int:
        return i * self.grid_w + j


@dataclass(frozen=True)
class ImpulseOffset:
    """Signed (row, col) displacement of an impulse filter's single one."""

    di: int
    dj: int

    def within_radius(self, f: int) -> bool:
        r = (f - 1) // 2
        return abs(self.di) <= r and abs(self.dj) <= r


@dataclass(frozen=True)
class Filter:
    size: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_filter_size(self.size)
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.size, self.size):
            raise ValueError(f"coefficients must be {self.size}x{self.size}, got {c.shape}")
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class ConvMatrix:
    grid: GridShape
    matrix: np.ndarray = field(repr=False)
    padding: str
    source: Union[Filter, ImpulseOffset]

    def __post_init__(self):
        n = self.grid.n
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix must be {n}x{n}, got {self.matrix.shape}")


def all_impulse_offsets(f: int) -> list[ImpulseOffset]:
    """The f**2 distinct impulse offsets, row-major from (-r, -r) to (r, r)."""
    r = (_check_filter_size(f) - 1) // 2
    return [ImpulseOffset(di, dj) for di in range(-r, r + 1) for dj in range(-r, r + 1)]


def make_filter(kind: str, f: int, seed: int = 0, offset: ImpulseOffset | None = None) -> Filter:
    """Construct a filter: i.i.d. standard normal, all-ones box, or impulse."""
    f = _check_filter_size(f)
    c = (f - 1) // 2
    if kind == "random":
        coeffs = SplitMix64(seed).normal_array((f, f))
    elif kind == "box":
        coeffs = np.ones((f, f))
    elif kind == "impulse":
        if offset is None:
            raise ValueError("impulse filter needs an offset")
        if not offset.within_radius(f):
            raise ValueError(f"offset {offset} outside radius of a {f}x{f} filter")
        coeffs = np.zeros((f, f))
        coeffs[c + offset.di, c + offset.dj] = 1.0
    else:
        raise ValueError(f"unknown filter kind {kind!r}")
    return Filter(f, coeffs)


def build_conv_matrix(filt: Filter, grid: GridShape, padding: str = CIRCULAR) -> ConvMatrix:
    """N x N matrix applying ``filt`` to a vectorized image by cross-correlation."""
    _check_padding(padding)
    f = filt.size
    if padding == CIRCULAR and f > min(grid.grid_h, grid.grid_w):
        raise ValueError(
            f"{f}x{f} filter does not fit a {grid.grid_h}x{grid.grid_w} grid "
            "under circular padding"
        )
    c = (f - 1) // 2
    n = grid.n
    m = np.zeros((n, n))
    for i in range(grid.grid_h):
        for j in range(grid.grid_w):
            row = grid.index(i, j)
            for u in range(f):
                for v in range(f):
                    si = i + u - c
                    sj = j + v - c
                    if padding == CIRCULAR:
                        col = grid.index(si % grid.grid_h, sj % grid.grid_w)
                    elif 0 <= si < grid.grid_h and 0 <= sj < grid.grid_w:
                        col = grid.index(si, sj)
                    else:
                        col = row
                    m[row, col] += filt.coeffs[u, v]
    return ConvMatrix(grid=grid, matrix=m, padding=padding, source=filt)


def impulse_conv_matrix(offset: ImpulseOffset, grid: GridShape, padding: str = CIRCULAR) -> ConvMatrix:
    """One-hot-per-row matrix shifting each pixel by ``offset``.

    Under circular padding the result is an exact permutation matrix; under
    zero_self_fallback, rows whose shifted source leaves the grid keep their
    one on the diagonal instead.
    """
    _check_padding(padding)
    n = grid.n
    m = np.zeros((n, n))
    for i in range(grid.grid_h):
        for j in range(grid.grid_w):
            row = grid.index(i, j)
            si = i + offset.di
            sj = j + offset.dj
            if padding == CIRCULAR:
                col = grid.index(si % grid.grid_h, sj % grid.grid_w)
            elif 0 <= si < grid.grid_h and 0 <= sj < grid.grid_w:
                col = grid.index(si, sj)
            else:
                col = row
            m[row, col] = 1.0
    return ConvMatrix(grid=grid, matrix=m, padding=padding, source=offset)


def sample_impulse_offsets(heads: int, f: int, seed: int) -> list[ImpulseOffset]:
    """Draw one impulse offset per head, deterministically.

    Offsets are sampled without replacement while distinct ones remain
    (heads <= f**2 gives all-distinct draws); any surplus heads draw with
    replacement from the full offset set.
    """
    if heads < 1:
        raise ValueError(f"need at least one head, got {heads}")
    pool = all_impulse_offsets(f)
    rng = SplitMix64(seed)
    rng.shuffle(pool)
    if heads <= len(pool):
        return pool[:heads]
    extra = [pool[rng.randbelow(len(pool))] for _ in range(heads - len(pool))]
    return pool + extra
