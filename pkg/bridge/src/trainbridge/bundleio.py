"""Standalone reader for the weight-bundle file format.

Parses the on-disk contract directly — magic, version, JSON header, raw
little-endian tensor payload — with no dependency on the package that wrote
the file. Tensors are exposed strictly by name; nothing is reordered,
reshaped, or transposed on the way in.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"STRCINIT"
VERSION = 1
_PRELUDE = struct.Struct("<8sIQ")
_DTYPES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}


class BundleLoadError(Exception):
    """The file does not satisfy the bundle format contract."""


@dataclass(frozen=True)
class LoadedBundle:
    """A parsed bundle: raw header plus name-keyed tensors in stored dtype."""

    header: dict = field(repr=False)
    tensors: dict = field(repr=False)

    @property
    def spec(self) -> dict:
        return self.header["spec"]

    @property
    def layers(self) -> int:
        return int(self.spec["layers"])

    @property
    def heads(self) -> int:
        return int(self.spec["heads"])

    @property
    def dim(self) -> int:
        return int(self.spec["dim"])

    @property
    def grid(self) -> tuple[int, int]:
        gh, gw = self.spec["grid"]
        return int(gh), int(gw)

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def pseudo_first(self) -> str:
        return self.spec["pseudo_first"]

    @property
    def pseudo_rest(self) -> str:
        return self.spec["pseudo_rest"]

    @property
    def padding(self) -> str:
        return self.spec["padding"]

    @property
    def metrics(self) -> dict:
        """Per-head metrics keyed by (layer, head)."""
        return {(int(m["layer"]), int(m["head"])): m for m in self.header["metrics"]}

    def tensor(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise BundleLoadError(f"bundle has no tensor named {name!r}") from None

    def head_qk(self, layer: int, head: int) -> tuple[np.ndarray, np.ndarray]:
        """The stored Q and K projections for one head, by name."""
        q = self.tensor(f"layer{layer}.head{head}.q")
        k = self.tensor(f"layer{layer}.head{head}.k")
        expected = (self.dim, self.head_dim)
        for name, t in ((f"layer{layer}.head{head}.q", q), (f"layer{layer}.head{head}.k", k)):
            if t.shape != expected:
                raise BundleLoadError(
                    f"tensor {name!r} has shape {t.shape}, expected {expected}"
                )
        return q, k


def load_bundle(path) -> LoadedBundle:
    """Parse and validate a bundle file."""
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < _PRELUDE.size:
        raise BundleLoadError(
            f"file is {len(data)} bytes, shorter than the {_PRELUDE.size}-byte prelude"
        )
    magic, version, header_len = _PRELUDE.unpack_from(data)
    if magic != MAGIC:
        raise BundleLoadError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BundleLoadError(f"unsupported format version {version}")
    body_start = _PRELUDE.size + header_len
    if len(data) < body_start:
        raise BundleLoadError(
            f"header claims {header_len} bytes but only {len(data) - _PRELUDE.size} remain"
        )
    try:
        header = json.loads(data[_PRELUDE.size:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleLoadError(f"header is not valid UTF-8 JSON: {exc}") from exc

    for key in ("tensors", "spec", "config", "metrics"):
        if key not in header:
            raise BundleLoadError(f"header is missing the {key!r} section")

    payload = data[body_start:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        try:
            name = entry["name"]
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
            offset = int(entry["offset"])
            length = int(entry["length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleLoadError(f"malformed tensor entry: {exc}") from exc
        if dtype not in _DTYPES:
            raise BundleLoadError(f"tensor {name!r}: unknown dtype {dtype!r}")
        nd = _DTYPES[dtype]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if any(s < 0 for s in shape):
            raise BundleLoadError(f"tensor {name!r}: negative shape entry")
        if length != count * nd.itemsize:
            raise BundleLoadError(
                f"tensor {name!r}: declared length {length} does not match shape {shape}"
            )
        if name in tensors:
            raise BundleLoadError(f"duplicate tensor name {name!r}")
        if offset < 0 or offset + length > len(payload):
            raise BundleLoadError(
                f"tensor {name!r} spans [{offset}, {offset + length}) but the "
                f"payload holds {len(payload)} bytes"
            )
        tensors[name] = np.frombuffer(payload, dtype=nd, count=count, offset=offset).reshape(shape)

    bundle = LoadedBundle(header=header, tensors=tensors)
    for layer in range(bundle.layers):
        for head in range(bundle.heads):
            bundle.head_qk(layer, head)
    return bundle
