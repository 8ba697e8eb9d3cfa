"""Surrogate inputs used while fitting attention parameters.

Kinds: 2-D sinusoidal positional encoding ("pe"), truncated-Gaussian noise
("gauss"), uniform noise ("uniform"), and additive mixtures of the encoding
with either noise ("pe+gauss", "pe+uniform"). Noise is sampled once per
input; callers keep it fixed for the whole optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gridconv import GridShape
from .rng import SplitMix64

PE = "pe"
GAUSS = "gauss"
UNIFORM = "uniform"
PE_PLUS_GAUSS = "pe+gauss"
PE_PLUS_UNIFORM = "pe+uniform"
KINDS = (PE, GAUSS, UNIFORM, PE_PLUS_GAUSS, PE_PLUS_UNIFORM)

# Gaussian noise: N(0, 0.5) truncated to [-2, 2]. Uniform: U(-1, 1).
GAUSS_STD = 0.5
GAUSS_BOUND = 2.0
UNIFORM_BOUND = 1.0


@dataclass(frozen=True)
class PseudoInput:
    grid: GridShape
    dim: int
    matrix: np.ndarray = field(repr=False)
    kind: str
    seed: int

    def __post_init__(self):
        if self.matrix.shape != (self.grid.n, self.dim):
            raise ValueError(
                f"matrix must be {self.grid.n}x{self.dim}, got {self.matrix.shape}"
            )


def sinusoidal_pe(grid: GridShape, dim: int) -> PseudoInput:
    """Factorized 2-D sin/cos positional encoding on the patch grid.

    The first dim/2 channels encode the row coordinate, the rest the column
    coordinate. Within each half, channel pair t holds
    (sin(w_t * coord), cos(w_t * coord)) with w_t = 10000**(-4t/dim).
    Deterministic; the seed field is fixed at 0.
    """
    if dim % 4 != 0:
        raise ValueError(f"embedding dimension must be divisible by 4, got {dim}")
    quarter = dim // 4
    freqs = 10000.0 ** (-4.0 * np.arange(quarter) / dim)
    rows = np.repeat(np.arange(grid.grid_h), grid.grid_w).astype(np.float64)
    cols = np.tile(np.arange(grid.grid_w), grid.grid_h).astype(np.float64)
    out = np.empty((grid.n, dim))
    row_angles = rows[:, None] * freqs[None, :]
    col_angles = cols[:, None] * freqs[None, :]
    half = dim // 2
    out[:, 0:half:2] = np.sin(row_angles)
    out[:, 1:half:2] = np.cos(row_angles)
    out[:, half::2] = np.sin(col_angles)
    out[:, half + 1 :: 2] = np.cos(col_angles)
    return PseudoInput(grid=grid, dim=dim, matrix=out, kind=PE, seed=0)


def noise_input(kind: str, grid: GridShape, dim: int, seed: int) -> PseudoInput:
    """Random pseudo input, sampled once from the seeded generator."""
    rng = SplitMix64(seed)
    if kind == GAUSS:
        m = rng.truncated_normal_array((grid.n, dim), 0.0, GAUSS_STD, -GAUSS_BOUND, GAUSS_BOUND)
    elif kind == UNIFORM:
        m = rng.uniform_array((grid.n, dim), -UNIFORM_BOUND, UNIFORM_BOUND)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return PseudoInput(grid=grid, dim=dim, matrix=m, kind=kind, seed=seed)


def mix_pe_noise(pe: PseudoInput, noise: PseudoInput) -> PseudoInput:
    """Entrywise sum of a positional encoding and a noise input."""
    if pe.kind != PE:
        raise ValueError(f"first argument must be a positional encoding, got {pe.kind!r}")
    if noise.kind not in (GAUSS, UNIFORM):
        raise ValueError(f"second argument must be noise, got {noise.kind!r}")
    if pe.matrix.shape != noise.matrix.shape:
        raise ValueError(
            f"shape mismatch: {pe.matrix.shape} vs {noise.matrix.shape}"
        )
    kind = PE_PLUS_GAUSS if noise.kind == GAUSS else PE_PLUS_UNIFORM
    return PseudoInput(
        grid=pe.grid,
        dim=pe.dim,
        matrix=pe.matrix + noise.matrix,
        kind=kind,
        seed=noise.seed,
    )


def make_pseudo_input(kind: str, grid: GridShape, dim: int, seed: int) -> PseudoInput:
    """Build any pseudo-input kind from one entry point."""
    if kind == PE:
        return sinusoidal_pe(grid, dim)
    if kind in (GAUSS, UNIFORM):
        return noise_input(kind, grid, dim, seed)
    if kind == PE_PLUS_GAUSS:
        return mix_pe_noise(sinusoidal_pe(grid, dim), noise_input(GAUSS, grid, dim, seed))
    if kind == PE_PLUS_UNIFORM:
        return mix_pe_noise(sinusoidal_pe(grid, dim), noise_input(UNIFORM, grid, dim, seed))
    raise ValueError(f"unknown pseudo-input kind {kind!r}, expected one of {KINDS}")
