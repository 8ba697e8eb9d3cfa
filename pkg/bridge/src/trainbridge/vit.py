"""A tiny vision transformer whose per-head Q/K projections can be replaced
by tensors from a weight bundle.

The attention convention matches the bundle writer exactly: pre-LN blocks
(LayerNorm feeds the projections), per-head logits scaled by 1/sqrt(head
dim), softmax over rows. Q and K projections carry no bias so that a
patched head computes literally ``softmax(scale · (XQ)(XK)ᵀ)`` on the
normalized stream.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .bundleio import BundleLoadError, LoadedBundle
from .recompute import sinusoidal_pe


class HeadedAttention(nn.Module):
    """Multi-head self-attention with separate, bias-free Q/K projections."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ValueError(f"dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = 1.0 / math.sqrt(self.head_dim)
        self.q_proj = nn.Linear(dim, dim, bias=False)
        self.k_proj = nn.Linear(dim, dim, bias=False)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        b, n, _ = x.shape
        def split(t):
            return t.view(b, n, self.heads, self.head_dim).transpose(1, 2)
        q = split(self.q_proj(x))
        k = split(self.k_proj(x))
        v = split(self.v_proj(x))
        amap = torch.softmax(self.scale * (q @ k.transpose(-1, -2)), dim=-1)
        out = (amap @ v).transpose(1, 2).reshape(b, n, self.dim)
        return self.out_proj(out), amap


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = HeadedAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        attn_out, amap = self.attn(self.ln1(x))
        x = x + attn_out
        x = x + self.mlp(self.ln2(x))
        return x, amap


class TinyViT(nn.Module):
    """Patch embedding + fixed sinusoidal PE + pre-LN blocks + mean pooling."""

    def __init__(
        self,
        grid: tuple[int, int],
        patch: int,
        dim: int,
        heads: int,
        depth: int,
        classes: int,
        channels: int = 1,
    ):
        super().__init__()
        if not (1 <= depth <= 4):
            raise ValueError(f"depth must be in 1..4, got {depth}")
        self.grid = grid
        self.dim = dim
        self.heads = heads
        self.patch_embed = nn.Conv2d(channels, dim, kernel_size=patch, stride=patch)
        # Kept in float64 and cast per forward, so a double-precision run
        # sees the encoding at full precision rather than a float32 copy.
        self.register_buffer("pos", sinusoidal_pe(grid[0], grid[1], dim))
        self.blocks = nn.ModuleList(Block(dim, heads) for _ in range(depth))
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, classes)

    def forward_with_maps(self, images: torch.Tensor) -> tuple[torch.Tensor, list]:
        x = self.patch_embed(images)
        b, d, gh, gw = x.shape
        if (gh, gw) != self.grid:
            raise ValueError(f"patch grid {(gh, gw)} does not match {self.grid}")
        x = x.flatten(2).transpose(1, 2)
        x = x + self.pos.to(x.dtype).unsqueeze(0)
        maps = []
        for block in self.blocks:
            x, amap = block(x)
            maps.append(amap)
        pooled = self.norm(x).mean(dim=1)
        return self.head(pooled), maps

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        logits, _ = self.forward_with_maps(images)
        return logits


def build_model(bundle: LoadedBundle, classes: int = 4, patch: int = 4, seed: int = 0) -> TinyViT:
    """A TinyViT shaped to the bundle, deterministically initialized."""
    torch.manual_seed(seed)
    model = TinyViT(
        grid=bundle.grid,
        patch=patch,
        dim=bundle.dim,
        heads=bundle.heads,
        depth=bundle.layers,
        classes=classes,
    )
    for module in model.modules():
        if isinstance(module, (nn.Linear, nn.Conv2d)):
            nn.init.trunc_normal_(module.weight, std=0.02)
            if module.bias is not None:
                nn.init.zeros_(module.bias)
    return model


def patch_qk(model: TinyViT, bundle: LoadedBundle) -> None:
    """Overwrite every block's per-head Q/K rows with the bundle tensors."""
    if bundle.dim != model.dim:
        raise BundleLoadError(
            f"dimension mismatch: bundle dim {bundle.dim}, model dim {model.dim}"
        )
    if bundle.heads != model.heads:
        raise BundleLoadError(
            f"dimension mismatch: bundle has {bundle.heads} heads, model {model.heads}"
        )
    if bundle.layers != len(model.blocks):
        raise BundleLoadError(
            f"dimension mismatch: bundle has {bundle.layers} layers, model {len(model.blocks)}"
        )
    if bundle.grid != model.grid:
        raise BundleLoadError(
            f"dimension mismatch: bundle grid {bundle.grid}, model grid {model.grid}"
        )
    hd = model.blocks[0].attn.head_dim
    with torch.no_grad():
        for layer, block in enumerate(model.blocks):
            for head in range(bundle.heads):
                q, k = bundle.head_qk(layer, head)
                rows = slice(head * hd, (head + 1) * hd)
                block.attn.q_proj.weight[rows, :] = torch.from_numpy(
                    q.astype("float64").T.copy()
                ).to(block.attn.q_proj.weight.dtype)
                block.attn.k_proj.weight[rows, :] = torch.from_numpy(
                    k.astype("float64").T.copy()
                ).to(block.attn.k_proj.weight.dtype)


def parameter_audit(a: nn.Module, b: nn.Module) -> list[str]:
    """Names of parameters whose values differ between two same-shaped models."""
    pa = dict(a.named_parameters())
    pb = dict(b.named_parameters())
    if pa.keys() != pb.keys():
        raise ValueError("models do not share a parameter set")
    return sorted(
        name for name in pa if not torch.equal(pa[name].detach(), pb[name].detach())
    )


def argmax_agreement(model: TinyViT, bundle: LoadedBundle, images: torch.Tensor) -> float:
    """Fraction of interior attention rows whose argmax hits the bundle's
    target column, over every image, layer, and head."""
    gh, gw = bundle.grid
    metrics = bundle.metrics
    interior = [
        i * gw + j for i in range(1, gh - 1) for j in range(1, gw - 1)
    ]
    if not interior:
        raise ValueError("grid has no interior rows")
    model = model.double().eval()
    with torch.no_grad():
        _, maps = model.forward_with_maps(images.double())
    hits = 0
    total = 0
    for layer, amap in enumerate(maps):
        for head in range(bundle.heads):
            offset = metrics[(layer, head)]["target_offset"]
            if offset is None:
                raise ValueError(f"layer {layer} head {head} has no recorded target offset")
            di, dj = offset
            arg = amap[:, head].argmax(dim=-1)
            for r in interior:
                i, j = divmod(r, gw)
                target = ((i + di) % gh) * gw + ((j + dj) % gw)
                hits += int((arg[:, r] == target).sum())
                total += arg.shape[0]
    return hits / total
