"""Fit per-head query/key projections so the initial attention map matches a
target convolution matrix.

The objective is the mean-squared Frobenius discrepancy

    (1/N^2) * || H - softmax_rows(scale * X q k^T X^T) ||_F^2

minimized with bias-corrected Adam. X is the layer-normalized pseudo input,
fixed for the whole run; gradients are analytic (softmax Jacobian applied
row by row), in double precision throughout.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .attention import AttentionHeadParams
from .gridconv import (
    ConvMatrix,
    GridShape,
    ImpulseOffset,
    impulse_conv_matrix,
    sample_impulse_offsets,
)
from .linalg import ShapeError, as_matrix, layer_norm_rows, softmax_rows
from .pseudo import KINDS, PseudoInput, make_pseudo_input
from .rng import SplitMix64, derive_seed

SAME_ALL_LAYERS = "same_all_layers"
PER_LAYER = "per_layer"
SHARINGS = (SAME_ALL_LAYERS, PER_LAYER)

# Stream tags for deriving independent per-task seeds from the master seed.
_TAG_OFFSETS = 1
_TAG_PSEUDO = 2
_TAG_INIT = 3

# Pre-optimization draws: truncated normal, bounded like the usual
# trunc-normal initializer.
_INIT_BOUND = 2.0


class SolverDivergedError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"loss became non-finite at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    lr: float = 1e-4
    max_iter: int = 10000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_std: float = 0.02
    seed: int = 0
    early_stop_loss: Optional[float] = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be >= 0, got {self.max_iter}")
        for name in ("adam_beta1", "adam_beta2"):
            b = getattr(self, name)
            if not 0.0 < b < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {b}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


def adam_step(state: AdamState, param: np.ndarray, grad: np.ndarray, config: SolverConfig) -> np.ndarray:
    """One bias-corrected Adam update; mutates ``state``, returns the new parameter."""
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    return param - config.lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)


@dataclass(frozen=True)
class HeadInitResult:
    params: AttentionHeadParams
    target_offset: Optional[ImpulseOffset]
    final_loss: float
    argmax_match_rate: float
    iterations_run: int
    loss_history: Optional[list[float]] = None


@dataclass(frozen=True)
class BundleSpec:
    """Which (layer, head) fits to run and how they share parameters."""

    layers: int
    heads: int
    dim: int
    grid: GridShape
    filter_size: int
    sharing: str = SAME_ALL_LAYERS
    pseudo_first: str = "pe"
    pseudo_rest: str = "pe"
    padding: str = "circular"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"need at least one layer, got {self.layers}")
        if self.heads < 1:
            raise ValueError(f"need at least one head, got {self.heads}")
        if self.dim % self.heads != 0:
            raise ValueError(
                f"embedding dimension {self.dim} is not divisible by {self.heads} heads"
            )
        if self.filter_size % 2 == 0 or self.filter_size < 1:
            raise ValueError(f"filter size must be odd, got {self.filter_size}")
        if self.sharing not in SHARINGS:
            raise ValueError(f"unknown sharing {self.sharing!r}, expected one of {SHARINGS}")
        for kind in (self.pseudo_first, self.pseudo_rest):
            if kind not in KINDS:
                raise ValueError(f"unknown pseudo-input kind {kind!r}")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


def _target_matrix(target: Union[ConvMatrix, np.ndarray]) -> tuple[np.ndarray, Optional[ImpulseOffset]]:
    if isinstance(target, ConvMatrix):
        offset = target.source if isinstance(target.source, ImpulseOffset) else None
        return target.matrix, offset
    t = as_matrix(target, "target")
    if t.shape[0] != t.shape[1]:
        raise ShapeError(f"target must be square, got {t.shape}")
    return t, None


def loss(params: AttentionHeadParams, x_tilde, target) -> float:
    """Mean-squared Frobenius distance between the attention map and the target."""
    l, _, _ = _loss_grad(params, as_matrix(x_tilde), _target_matrix(target)[0], want_grad=False)
    return l


def loss_and_grad(params: AttentionHeadParams, x_tilde, target):
    """Loss plus analytic gradients with respect to q and k."""
    return _loss_grad(params, as_matrix(x_tilde), _target_matrix(target)[0], want_grad=True)


def _loss_grad(params: AttentionHeadParams, x: np.ndarray, h: np.ndarray, want_grad: bool):
    n = h.shape[0]
    if x.shape[0] != n:
        raise ShapeError(f"pseudo input has {x.shape[0]} rows but target is {n}x{n}")
    if x.shape[1] != params.q.shape[0]:
        raise ShapeError(
            f"input width {x.shape[1]} does not match projection height {params.q.shape[0]}"
        )
    a = x @ params.q
    b = x @ params.k
    p = softmax_rows(params.scale * (a @ b.T))
    r = p - h
    inv_n2 = 1.0 / (n * n)
    l = float((r * r).sum()) * inv_n2
    if not want_grad:
        return l, None, None
    # backprop: residual -> row-wise softmax Jacobian diag(p) - p p^T -> bilinear form
    g = (2.0 * inv_n2) * r
    ds = p * (g - (g * p).sum(axis=1, keepdims=True))
    grad_q = params.scale * (x.T @ (ds @ b))
    grad_k = params.scale * (x.T @ (ds.T @ a))
    return l, grad_q, grad_k


def _match_rate(params: AttentionHeadParams, x: np.ndarray, h: np.ndarray) -> float:
    a = x @ params.q
    b = x @ params.k
    p = softmax_rows(params.scale * (a @ b.T))
    return float((p.argmax(axis=1) == h.argmax(axis=1)).mean())


def solve_head(
    target: Union[ConvMatrix, np.ndarray],
    pseudo: PseudoInput,
    config: SolverConfig,
    heads: int,
    record_loss: bool = False,
) -> HeadInitResult:
    """Run the Adam fit for one head against one target matrix.

    The pseudo input is layer-normalized once up front and never resampled;
    q and k start from truncated-normal draws with std ``config.init_std``.
    """
    h, offset = _target_matrix(target)
    if pseudo.dim % heads != 0:
        raise ValueError(f"dimension {pseudo.dim} is not divisible by {heads} heads")
    if pseudo.grid.n != h.shape[0]:
        raise ShapeError(
            f"pseudo input covers {pseudo.grid.n} positions but target is {h.shape[0]}x{h.shape[0]}"
        )
    head_dim = pseudo.dim // heads
    x = layer_norm_rows(pseudo.matrix)

    rng = SplitMix64(config.seed)
    q = rng.truncated_normal_array(
        (pseudo.dim, head_dim), 0.0, config.init_std, -_INIT_BOUND, _INIT_BOUND
    )
    k = rng.truncated_normal_array(
        (pseudo.dim, head_dim), 0.0, config.init_std, -_INIT_BOUND, _INIT_BOUND
    )
    scale = 1.0 / np.sqrt(head_dim)

    state_q = AdamState.zeros_like(q)
    state_k = AdamState.zeros_like(k)
    history: Optional[list[float]] = [] if record_loss else None
    iterations = 0
    for it in range(1, config.max_iter + 1):
        params = AttentionHeadParams(q=q, k=k, scale=scale)
        # Shapes are consistent by construction, so a ValueError here can
        # only mean the logits overflowed to non-finite values.
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                l, grad_q, grad_k = _loss_grad(params, x, h, want_grad=True)
        except ValueError:
            raise SolverDivergedError(it) from None
        if not np.isfinite(l):
            raise SolverDivergedError(it)
        if history is not None:
            history.append(l)
        q = adam_step(state_q, q, grad_q, config)
        k = adam_step(state_k, k, grad_k, config)
        iterations = it
        if config.early_stop_loss is not None and l <= config.early_stop_loss:
            break

    params = AttentionHeadParams(q=q, k=k, scale=scale)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            final_loss, _, _ = _loss_grad(params, x, h, want_grad=False)
    except ValueError:
        raise SolverDivergedError(iterations) from None
    if not np.isfinite(final_loss):
        raise SolverDivergedError(iterations)
    return HeadInitResult(
        params=params,
        target_offset=offset,
        final_loss=final_loss,
        argmax_match_rate=_match_rate(params, x, h),
        iterations_run=iterations,
        loss_history=history,
    )


def pseudo_for_layer(
    spec: BundleSpec, seed: int, layer: int, kind: Optional[str] = None
) -> PseudoInput:
    """The pseudo input a given layer's fit uses, with its derived noise seed.

    Layer 0 uses ``pseudo_first``; all later layers use ``pseudo_rest``. Kept
    as a public helper so recomputation paths reproduce the exact inputs the
    bundle was solved with. ``kind`` substitutes a different input family
    while keeping the layer's seed derivation.
    """
    if kind is None:
        kind = spec.pseudo_first if layer == 0 else spec.pseudo_rest
    return make_pseudo_input(kind, spec.grid, spec.dim, derive_seed(seed, _TAG_PSEUDO, layer))


def solve_bundle(spec: BundleSpec, config: SolverConfig) -> list[list[HeadInitResult]]:
    """Solve every (layer, head) task in a spec.

    With per-layer sharing, each layer samples its own head offsets and runs
    its own fits with layer-mixed seeds. With shared parameters, layer 0 is
    solved once against the first-layer pseudo input and its results are
    reused verbatim for every other layer.
    """
    if spec.sharing == SAME_ALL_LAYERS:
        offsets = sample_impulse_offsets(
            spec.heads, spec.filter_size, derive_seed(config.seed, _TAG_OFFSETS, 0)
        )
        layer0 = _solve_layer(spec, config, 0, offsets)
        return [layer0 for _ in range(spec.layers)]

    results = []
    for layer in range(spec.layers):
        offsets = sample_impulse_offsets(
            spec.heads, spec.filter_size, derive_seed(config.seed, _TAG_OFFSETS, layer)
        )
        results.append(_solve_layer(spec, config, layer, offsets))
    return results


def _solve_layer(
    spec: BundleSpec, config: SolverConfig, layer: int, offsets: list[ImpulseOffset]
) -> list[HeadInitResult]:
    pseudo = pseudo_for_layer(spec, config.seed, layer)
    out = []
    for head, offset in enumerate(offsets):
        target = impulse_conv_matrix(offset, spec.grid, spec.padding)
        task_config = dataclasses.replace(
            config, seed=derive_seed(config.seed, _TAG_INIT, layer, head)
        )
        out.append(solve_head(target, pseudo, task_config, spec.heads))
    return out
