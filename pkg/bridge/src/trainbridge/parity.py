"""Attention-map parity between this package and CSV dumps of the writer.

The reference maps come from ``convinit attn-map --out <file>.csv``; this
module recomputes the same maps in PyTorch and reports the per-head maximum
absolute deviation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .bundleio import BundleLoadError, LoadedBundle
from .recompute import bundle_attention_map


@dataclass(frozen=True)
class HeadParity:
    layer: int
    head: int
    max_abs_deviation: float

    def __post_init__(self):
        if not (self.max_abs_deviation >= 0.0):
            raise ValueError(f"deviation must be ≥ 0, got {self.max_abs_deviation}")


@dataclass(frozen=True)
class ParityReport:
    threshold: float
    heads: tuple
    passed: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "threshold": self.threshold,
                "heads": [asdict(h) for h in self.heads],
                "passed": self.passed,
            },
            indent=2,
            sort_keys=True,
        )


def read_matrix_csv(path) -> np.ndarray:
    """Read a comma-separated float64 matrix (the writer's CSV dialect)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: no rows")
    width = len(rows[0])
    for line_no, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValueError(f"{path}: row {line_no} has {len(row)} cells, expected {width}")
    return np.array(rows, dtype=np.float64)


def verify_parity(bundle: LoadedBundle, reference_maps: dict, threshold: float) -> ParityReport:
    """Compare recomputed maps against reference maps for every (layer, head).

    ``reference_maps`` maps (layer, head) to a CSV path or an ndarray.
    """
    n = bundle.grid[0] * bundle.grid[1]
    entries = []
    for layer in range(bundle.layers):
        for head in range(bundle.heads):
            key = (layer, head)
            if key not in reference_maps:
                raise BundleLoadError(f"no reference map for layer {layer} head {head}")
            ref = reference_maps[key]
            if not isinstance(ref, np.ndarray):
                ref = read_matrix_csv(ref)
            if ref.shape != (n, n):
                raise BundleLoadError(
                    f"reference map for tensor 'layer{layer}.head{head}' has shape "
                    f"{ref.shape}, expected {(n, n)}"
                )
            ours = bundle_attention_map(bundle, layer, head).numpy()
            deviation = float(np.max(np.abs(ours - ref)))
            entries.append(HeadParity(layer=layer, head=head, max_abs_deviation=deviation))
    passed = all(e.max_abs_deviation <= threshold for e in entries)
    return ParityReport(threshold=threshold, heads=tuple(entries), passed=passed)


def write_report_json(report: ParityReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
