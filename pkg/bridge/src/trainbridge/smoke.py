"""Desk-scale smoke training: structured init vs plain random init.

Trains the same tiny ViT twice from the same base initialization — once
with bundle Q/K patched in, once untouched — on a small synthetic labeled
set, and writes one loss-curve CSV per run. This is mechanics checking
only; no accuracy claims are made or asserted.
"""

from __future__ import annotations

import os

import torch
from torch import nn

from .bundleio import LoadedBundle
from .vit import TinyViT, build_model, patch_qk

CLASSES = 4


def synthetic_dataset(
    count: int, grid: tuple[int, int], patch: int, seed: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Labeled images: class c brightens quadrant c of a noisy canvas."""
    g = torch.Generator().manual_seed(seed)
    h, w = grid[0] * patch, grid[1] * patch
    images = 0.1 * torch.randn((count, 1, h, w), generator=g)
    labels = torch.randint(0, CLASSES, (count,), generator=g)
    for idx in range(count):
        c = int(labels[idx])
        i0 = 0 if c < 2 else h // 2
        j0 = 0 if c % 2 == 0 else w // 2
        images[idx, 0, i0 : i0 + h // 2, j0 : j0 + w // 2] += 1.0
    return images, labels


def train_model(
    model: TinyViT,
    images: torch.Tensor,
    labels: torch.Tensor,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
) -> list[tuple[int, int, float]]:
    """Plain Adam + cross-entropy loop; returns (epoch, step, loss) rows."""
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    rows = []
    model.train()
    for epoch in range(epochs):
        order = torch.randperm(
            images.shape[0], generator=torch.Generator().manual_seed(seed + epoch)
        )
        for step, start in enumerate(range(0, images.shape[0], batch_size)):
            batch = order[start : start + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(images[batch]), labels[batch])
            loss.backward()
            opt.step()
            rows.append((epoch, step, float(loss.detach())))
    return rows


def write_loss_csv(rows: list[tuple[int, int, float]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,step,loss\n")
        for epoch, step, loss in rows:
            fh.write(f"{epoch},{step},{loss:.17e}\n")


def patch_and_smoke_train(
    bundle: LoadedBundle,
    epochs: int,
    subset_size: int,
    seed: int,
    out_dir,
    patch: int = 4,
    batch_size: int = 8,
    lr: float = 3e-3,
) -> dict:
    """Run the structured-vs-baseline comparison and write both CSV curves."""
    images, labels = synthetic_dataset(subset_size, bundle.grid, patch, seed + 1)

    curves = {}
    for name, structured in (("structured", True), ("baseline", False)):
        model = build_model(bundle, classes=CLASSES, patch=patch, seed=seed)
        if structured:
            patch_qk(model, bundle)
        rows = train_model(model, images, labels, epochs, batch_size, lr, seed)
        path = os.path.join(out_dir, f"{name}_loss.csv")
        write_loss_csv(rows, path)
        curves[name] = {"rows": rows, "csv": path}
    return curves
