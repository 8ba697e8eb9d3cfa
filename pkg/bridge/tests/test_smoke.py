"""Smoke-training mechanics: dataset, loop, and emitted loss curves."""

import math

import pytest
import torch

from trainbridge import (
    build_model,
    load_bundle,
    patch_and_smoke_train,
    synthetic_dataset,
    train_model,
    write_loss_csv,
)


class TestSyntheticDataset:
    def test_shapes_and_label_range(self):
        images, labels = synthetic_dataset(12, (8, 8), 4, seed=0)
        assert images.shape == (12, 1, 32, 32)
        assert labels.shape == (12,)
        assert labels.min() >= 0 and labels.max() <= 3

    def test_deterministic_per_seed(self):
        a = synthetic_dataset(6, (4, 4), 4, seed=9)
        b = synthetic_dataset(6, (4, 4), 4, seed=9)
        c = synthetic_dataset(6, (4, 4), 4, seed=10)
        assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])
        assert not torch.equal(a[0], c[0])

    def test_labeled_quadrant_is_brightest(self):
        images, labels = synthetic_dataset(20, (8, 8), 4, seed=3)
        for img, label in zip(images, labels):
            quads = [
                img[0, :16, :16].mean(), img[0, :16, 16:].mean(),
                img[0, 16:, :16].mean(), img[0, 16:, 16:].mean(),
            ]
            assert max(range(4), key=lambda q: quads[q]) == int(label)


class TestTrainLoop:
    def test_rows_cover_epochs_and_steps(self, vit_bundle):
        bundle = load_bundle(vit_bundle)
        model = build_model(bundle, seed=2)
        images, labels = synthetic_dataset(16, bundle.grid, 4, seed=2)
        rows = train_model(model, images, labels, epochs=2, batch_size=8, lr=1e-3, seed=2)
        assert [(e, s) for e, s, _ in rows] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert all(math.isfinite(loss) for _, _, loss in rows)

    def test_training_updates_parameters(self, vit_bundle):
        bundle = load_bundle(vit_bundle)
        model = build_model(bundle, seed=2)
        before = {k: v.clone() for k, v in model.named_parameters()}
        images, labels = synthetic_dataset(8, bundle.grid, 4, seed=2)
        train_model(model, images, labels, epochs=1, batch_size=8, lr=1e-3, seed=2)
        changed = [k for k, v in model.named_parameters() if not torch.equal(before[k], v)]
        assert changed


class TestLossCsv:
    def test_format(self, tmp_path):
        path = tmp_path / "curve.csv"
        write_loss_csv([(0, 0, 1.5), (0, 1, 0.25)], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,step,loss"
        assert lines[1].startswith("0,0,1.5")
        assert len(lines) == 3
        for line in lines[1:]:
            epoch, step, loss = line.split(",")
            assert float(loss) >= 0


class TestTwoEpochRun:
    def test_completes_and_emits_both_curves(self, vit_bundle, tmp_path):
        bundle = load_bundle(vit_bundle)
        curves = patch_and_smoke_train(bundle, epochs=2, subset_size=32, seed=4, out_dir=tmp_path)
        assert set(curves) == {"structured", "baseline"}
        for name, info in curves.items():
            lines = (tmp_path / f"{name}_loss.csv").read_text().splitlines()
            assert lines[0] == "epoch,step,loss"
            assert len(lines) == 1 + 2 * 4
            assert info["rows"] == [
                (int(e), int(s), float(l))
                for e, s, l in (line.split(",") for line in lines[1:])
            ]
            assert all(math.isfinite(loss) and loss > 0 for _, _, loss in info["rows"])

    def test_structured_and_baseline_are_distinct_runs(self, vit_bundle, tmp_path):
        bundle = load_bundle(vit_bundle)
        curves = patch_and_smoke_train(bundle, epochs=1, subset_size=16, seed=4, out_dir=tmp_path)
        s = [l for _, _, l in curves["structured"]["rows"]]
        b = [l for _, _, l in curves["baseline"]["rows"]]
        assert s != b
