"""Per-head softmax attention maps and spatial mixing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .gridconv import ConvMatrix
from .linalg import ShapeError, as_matrix, softmax_rows

ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class AttentionHeadParams:
    """Query/key projections of one head plus the logit scale.

    ``q`` and ``k`` are D x K with K the per-head width; the scale defaults
    to 1/sqrt(K) and multiplies the logits before the softmax.
    """

    q: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    scale: float | None = None

    def __post_init__(self):
        q = as_matrix(self.q, "q")
        k = as_matrix(self.k, "k")
        if q.shape != k.shape:
            raise ShapeError(f"q and k must share shape, got {q.shape} vs {k.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k", k)
        if self.scale is None:
            object.__setattr__(self, "scale", 1.0 / np.sqrt(q.shape[1]))

    @property
    def head_dim(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True)
class AttentionMap:
    """Row-stochastic N x N mixing matrix."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix, "attention map")
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"attention map must be square, got {m.shape}")
        if not (m > 0).all():
            raise ValueError("attention map rows must be strictly positive")
        sums = m.sum(axis=1)
        if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("attention map rows must sum to 1")
        object.__setattr__(self, "matrix", m)


def attention_map(x_tilde, params: AttentionHeadParams) -> AttentionMap:
    """softmax_rows(scale * x q k^T x^T) for one head."""
    x = as_matrix(x_tilde, "pseudo input")
    if x.shape[1] != params.q.shape[0]:
        raise ShapeError(
            f"input width {x.shape[1]} does not match projection height {params.q.shape[0]}"
        )
    logits = params.scale * ((x @ params.q) @ (x @ params.k).T)
    return AttentionMap(softmax_rows(logits))


def spatial_mix(m: Union[AttentionMap, ConvMatrix, np.ndarray], x) -> np.ndarray:
    """Apply an N x N spatial mixing matrix to N x D features."""
    if isinstance(m, AttentionMap):
        mat = m.matrix
    elif isinstance(m, ConvMatrix):
        mat = m.matrix
    else:
        mat = as_matrix(m, "mixing matrix")
    xm = as_matrix(x, "features")
    if mat.shape[1] != xm.shape[0]:
        raise ShapeError(
            f"mixing matrix is {mat.shape[0]}x{mat.shape[1]} but features have "
            f"{xm.shape[0]} rows"
        )
    return mat @ xm
