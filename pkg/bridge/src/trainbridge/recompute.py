"""Recompute attention maps from a loaded bundle in PyTorch.

The pipeline mirrors the documented weight-file contract: build the 2-D
sinusoidal position encoding for the recorded grid and width, LayerNorm each
row (ε = 1e-5, no affine parameters), then take
``softmax(scale · (XQ)(XK)ᵀ)`` per head with ``scale = 1/sqrt(dim/heads)``.
Everything runs in float64.
"""

from __future__ import annotations

import math

import torch

from .bundleio import BundleLoadError, LoadedBundle


def sinusoidal_pe(grid_h: int, grid_w: int, dim: int) -> torch.Tensor:
    """Factorized 2-D sin/cos position encoding, positions row-major.

    The first dim/2 channels encode the row coordinate, the rest the column
    coordinate; within each half, channel pair t holds (sin, cos) at
    frequency 10000**(-4t/dim).
    """
    if dim % 4 != 0:
        raise ValueError(f"embedding dimension must be divisible by 4, got {dim}")
    n = grid_h * grid_w
    quarter = dim // 4
    freqs = torch.tensor(
        [10000.0 ** (-4.0 * t / dim) for t in range(quarter)], dtype=torch.float64
    )
    rows = torch.arange(n, dtype=torch.float64) // grid_w
    cols = torch.arange(n, dtype=torch.float64) % grid_w
    row_angles = rows[:, None] * freqs[None, :]
    col_angles = cols[:, None] * freqs[None, :]
    out = torch.empty((n, dim), dtype=torch.float64)
    half = dim // 2
    out[:, 0:half:2] = torch.sin(row_angles)
    out[:, 1:half:2] = torch.cos(row_angles)
    out[:, half::2] = torch.sin(col_angles)
    out[:, half + 1 :: 2] = torch.cos(col_angles)
    return out


def layer_norm_rows(x: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Per-row LayerNorm with gain 1 and bias 0; eps sits inside the sqrt."""
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps)


def head_attention_map(x: torch.Tensor, q: torch.Tensor, k: torch.Tensor, scale: float) -> torch.Tensor:
    """softmax over rows of ``scale · (XQ)(XK)ᵀ``."""
    logits = scale * ((x @ q) @ (x @ k).T)
    return torch.softmax(logits, dim=-1)


def pseudo_input(bundle: LoadedBundle, layer: int) -> torch.Tensor:
    """The layer's pseudo input, reproducible from the header alone.

    Only the deterministic "pe" kind can be rebuilt outside the writer —
    noise draws depend on the writer's internal seed derivation, which is
    not part of the file contract.
    """
    kind = bundle.pseudo_first if layer == 0 else bundle.pseudo_rest
    if kind != "pe":
        raise BundleLoadError(
            f"layer {layer} used pseudo input kind {kind!r}; only 'pe' can be "
            "recomputed from the bundle alone"
        )
    gh, gw = bundle.grid
    return sinusoidal_pe(gh, gw, bundle.dim)


def bundle_attention_map(bundle: LoadedBundle, layer: int, head: int) -> torch.Tensor:
    """One head's attention map, recomputed in float64 from stored weights."""
    if not (0 <= layer < bundle.layers):
        raise BundleLoadError(f"layer {layer} out of range for {bundle.layers} layers")
    if not (0 <= head < bundle.heads):
        raise BundleLoadError(f"head {head} out of range for {bundle.heads} heads")
    q, k = bundle.head_qk(layer, head)
    x = layer_norm_rows(pseudo_input(bundle, layer))
    scale = 1.0 / math.sqrt(bundle.head_dim)
    return head_attention_map(
        x,
        torch.from_numpy(q.astype("float64")),
        torch.from_numpy(k.astype("float64")),
        scale,
    )
