"""Brute-force checks of when channel mixing alone can realize target filters.

An instance fixes a low-rank data matrix X = Z A (Z is n x k, A is k x D)
and one f x f filter per channel. A channel-mixing weight vector w realizes a
set of k target filters exactly when the stacked linear system

    column i of G = A[:, i]  (kron)  vec(filter_i),     G w = t

has a solution, with t the stacked vectorized targets. Counting rows and
columns gives the D >= k * f^2 threshold this module probes numerically; the
least-squares residual of the system is the expressibility measure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gridconv import (
    CIRCULAR,
    Filter,
    GridShape,
    all_impulse_offsets,
    build_conv_matrix,
    make_filter,
)
from .rng import SplitMix64, derive_seed

RANDOM = "random"
IMPULSE_BALANCED = "impulse_balanced"
BOX = "box"
FILTER_KINDS = (RANDOM, IMPULSE_BALANCED, BOX)

# Tikhonov damping for the normal equations, and the residual level at which
# a target set is declared reachable.
RIDGE = 1e-12
EXPRESSIBLE_TOL = 1e-8

_TAG_BASIS = 11
_TAG_MIXING = 12
_TAG_FILTERS = 13
_TAG_TARGETS = 14
_TAG_PROBES = 15


@dataclass(frozen=True)
class Prop1Instance:
    grid: GridShape
    dim: int
    rank: int
    filter_size: int
    basis: np.ndarray
    mixing: np.ndarray
    filters: tuple[Filter, ...]
    assignment: tuple[int, ...]

    def __post_init__(self):
        n = self.grid.n
        if self.basis.shape != (n, self.rank):
            raise ValueError(f"basis must be {n}x{self.rank}, got {self.basis.shape}")
        if self.mixing.shape != (self.rank, self.dim):
            raise ValueError(
                f"mixing must be {self.rank}x{self.dim}, got {self.mixing.shape}"
            )
        if len(self.filters) != self.dim:
            raise ValueError(f"need one filter per channel, got {len(self.filters)}")
        if len(self.assignment) != self.dim:
            raise ValueError(
                f"need one assignment per channel, got {len(self.assignment)}"
            )

    @property
    def data(self) -> np.ndarray:
        """The rank-<= k data matrix X = Z A, shape n x D."""
        return self.basis @ self.mixing


@dataclass(frozen=True)
class ExpressibilityReport:
    residual: float
    system_rank: int
    condition_holds: bool
    weights: np.ndarray


def build_instance(
    grid: GridShape, dim: int, rank: int, filter_size: int, filter_kind: str, seed: int
) -> Prop1Instance:
    """Sample a low-rank instance with the chosen per-channel filter family.

    ``impulse_balanced`` deals the f^2 one-hot filters round-robin over the
    channels, ``box`` gives every channel the all-ones filter, ``random``
    draws independent dense coefficients per channel.
    """
    if rank < 1:
        raise ValueError(f"rank must be positive, got {rank}")
    if rank > min(grid.n, dim):
        raise ValueError(
            f"rank {rank} exceeds min(positions={grid.n}, channels={dim})"
        )
    if filter_kind not in FILTER_KINDS:
        raise ValueError(
            f"unknown filter kind {filter_kind!r}, expected one of {FILTER_KINDS}"
        )

    basis = SplitMix64(derive_seed(seed, _TAG_BASIS)).normal_array((grid.n, rank))
    mixing = SplitMix64(derive_seed(seed, _TAG_MIXING)).normal_array((rank, dim))

    filters: list[Filter] = []
    assignment: list[int] = []
    if filter_kind == IMPULSE_BALANCED:
        offsets = all_impulse_offsets(filter_size)
        for channel in range(dim):
            which = channel % len(offsets)
            filters.append(make_filter("impulse", filter_size, offset=offsets[which]))
            assignment.append(which)
    elif filter_kind == BOX:
        box = make_filter("box", filter_size)
        for channel in range(dim):
            filters.append(box)
            assignment.append(0)
    else:
        rng = SplitMix64(derive_seed(seed, _TAG_FILTERS))
        for channel in range(dim):
            coeffs = rng.normal_array((filter_size, filter_size))
            filters.append(Filter(size=filter_size, coeffs=coeffs))
            assignment.append(channel)

    return Prop1Instance(
        grid=grid,
        dim=dim,
        rank=rank,
        filter_size=filter_size,
        basis=basis,
        mixing=mixing,
        filters=tuple(filters),
        assignment=tuple(assignment),
    )


def _system_matrix(instance: Prop1Instance) -> np.ndarray:
    f2 = instance.filter_size * instance.filter_size
    g = np.empty((instance.rank * f2, instance.dim), dtype=np.float64)
    for i in range(instance.dim):
        g[:, i] = np.kron(instance.mixing[:, i], instance.filters[i].coeffs.reshape(-1))
    return g


def _check_targets(instance: Prop1Instance, target_filters: Sequence[Filter]) -> None:
    if len(target_filters) != instance.rank:
        raise ValueError(
            f"expected {instance.rank} target filters, got {len(target_filters)}"
        )
    for t in target_filters:
        if t.size != instance.filter_size:
            raise ValueError(
                f"target filter size {t.size} does not match instance size "
                f"{instance.filter_size}"
            )


def _stack_targets(instance: Prop1Instance, target_filters: Sequence[Filter]) -> np.ndarray:
    _check_targets(instance, target_filters)
    return np.concatenate([t.coeffs.reshape(-1) for t in target_filters])


def expressibility_residual(
    instance: Prop1Instance, target_filters: Sequence[Filter]
) -> ExpressibilityReport:
    """Solve the channel-mixing system in the least-squares sense.

    Returns the Euclidean residual of the best w, the numeric rank of the
    system matrix, and whether the counting condition D >= k * f^2 holds.
    """
    g = _system_matrix(instance)
    t = _stack_targets(instance, target_filters)
    if not np.any(g):
        raise ValueError("system matrix is identically zero")
    gram = g.T @ g + RIDGE * np.eye(instance.dim)
    w = np.linalg.solve(gram, g.T @ t)
    residual = float(np.linalg.norm(g @ w - t))
    f2 = instance.filter_size * instance.filter_size
    return ExpressibilityReport(
        residual=residual,
        system_rank=int(np.linalg.matrix_rank(g)),
        condition_holds=instance.dim >= instance.rank * f2,
        weights=w,
    )


def output_equivalence_check(
    instance: Prop1Instance,
    weights: np.ndarray,
    target_filters: Sequence[Filter],
    probe_images: int,
    seed: int,
) -> float:
    """Compare the two mixing formulations on random probe decompositions.

    For each probe, random basis images z_1..z_k induce channels
    x_i = sum_j a_ji z_j; the check evaluates sum_i w_i H_i x_i against
    sum_j Ht_j z_j at the spatial-mixing-matrix level and returns the largest
    absolute entry deviation seen.
    """
    if probe_images < 1:
        raise ValueError(f"need at least one probe, got {probe_images}")
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape != (instance.dim,):
        raise ValueError(f"weights must have length {instance.dim}, got {w.shape}")
    _check_targets(instance, target_filters)

    channel_mats = [
        build_conv_matrix(filt, instance.grid, CIRCULAR).matrix
        for filt in instance.filters
    ]
    target_mats = [
        build_conv_matrix(filt, instance.grid, CIRCULAR).matrix
        for filt in target_filters
    ]

    rng = SplitMix64(derive_seed(seed, _TAG_PROBES))
    worst = 0.0
    for _ in range(probe_images):
        z = rng.normal_array((instance.grid.n, instance.rank))
        x = z @ instance.mixing
        mixed = np.zeros(instance.grid.n, dtype=np.float64)
        for i in range(instance.dim):
            mixed += w[i] * (channel_mats[i] @ x[:, i])
        direct = np.zeros(instance.grid.n, dtype=np.float64)
        for j in range(instance.rank):
            direct += target_mats[j] @ z[:, j]
        worst = max(worst, float(np.max(np.abs(mixed - direct))))
    return worst


@dataclass(frozen=True)
class SweepRow:
    dim: int
    seed: int
    system_rank: int
    condition_holds: bool
    residual: float


def random_targets(rank: int, filter_size: int, seed: int) -> list[Filter]:
    """Generic dense target filters for sweeps and CLI checks."""
    rng = SplitMix64(derive_seed(seed, _TAG_TARGETS))
    return [
        Filter(size=filter_size, coeffs=rng.normal_array((filter_size, filter_size)))
        for _ in range(rank)
    ]


def residual_sweep(
    grid: GridShape,
    rank: int,
    filter_size: int,
    d_min: int,
    d_max: int,
    filter_kind: str,
    seeds: int,
) -> list[SweepRow]:
    """Residuals over a channel-count range, one row per (D, seed) pair."""
    if d_min < 1 or d_max < d_min:
        raise ValueError(f"bad channel range [{d_min}, {d_max}]")
    if seeds < 1:
        raise ValueError(f"need at least one seed, got {seeds}")
    rows = []
    for dim in range(d_min, d_max + 1):
        for s in range(seeds):
            instance = build_instance(
                grid, dim, rank, filter_size, filter_kind, derive_seed(s, dim)
            )
            targets = random_targets(rank, filter_size, derive_seed(s, dim))
            report = expressibility_residual(instance, targets)
            rows.append(
                SweepRow(
                    dim=dim,
                    seed=s,
                    system_rank=report.system_rank,
                    condition_holds=report.condition_holds,
                    residual=report.residual,
                )
            )
    return rows
