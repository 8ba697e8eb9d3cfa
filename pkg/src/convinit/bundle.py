"""Self-describing binary container for solved projection weights.

Layout, in file order:

  bytes 0..7    magic b"STRCINIT"
  bytes 8..11   format version, u32 little-endian
  bytes 12..19  header length in bytes, u64 little-endian
  header        UTF-8 JSON, space-padded so the payload starts 8-byte aligned
  payload       raw little-endian scalars, each tensor 8-byte aligned

The JSON header carries the tensor table (name, dtype, shape, offset into the
payload, byte length), the solve spec and solver config needed to recompute
everything, and per-head metrics. Tensor names are ``layer{L}.head{H}.q`` and
``layer{L}.head{H}.k``. Scalars are f64 by default; f32 narrowing uses the
hardware round-to-nearest-even conversion and only happens at write time.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .attention import AttentionHeadParams
from .gridconv import GridShape, ImpulseOffset
from .solver import BundleSpec, HeadInitResult, SolverConfig

MAGIC = b"STRCINIT"
VERSION = 1

_PRELUDE = struct.Struct("<8sIQ")
_DTYPES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}


class BundleError(Exception):
    """Base for all bundle format violations."""


class BadMagicError(BundleError):
    pass


class UnsupportedVersionError(BundleError):
    pass


class HeaderError(BundleError):
    pass


class ShortPayloadError(BundleError):
    pass


class OverlappingTensorError(BundleError):
    pass


def tensor_name(layer: int, head: int, which: str) -> str:
    if which not in ("q", "k"):
        raise ValueError(f"tensor role must be 'q' or 'k', got {which!r}")
    return f"layer{layer}.head{head}.{which}"


def _spec_to_json(spec: BundleSpec) -> dict:
    return {
        "layers": spec.layers,
        "heads": spec.heads,
        "dim": spec.dim,
        "grid": [spec.grid.grid_h, spec.grid.grid_w],
        "filter_size": spec.filter_size,
        "sharing": spec.sharing,
        "pseudo_first": spec.pseudo_first,
        "pseudo_rest": spec.pseudo_rest,
        "padding": spec.padding,
    }


def _spec_from_json(obj: dict) -> BundleSpec:
    return BundleSpec(
        layers=int(obj["layers"]),
        heads=int(obj["heads"]),
        dim=int(obj["dim"]),
        grid=GridShape(int(obj["grid"][0]), int(obj["grid"][1])),
        filter_size=int(obj["filter_size"]),
        sharing=obj["sharing"],
        pseudo_first=obj["pseudo_first"],
        pseudo_rest=obj["pseudo_rest"],
        padding=obj["padding"],
    )


def _config_to_json(config: SolverConfig) -> dict:
    return {
        "lr": config.lr,
        "max_iter": config.max_iter,
        "adam_beta1": config.adam_beta1,
        "adam_beta2": config.adam_beta2,
        "adam_eps": config.adam_eps,
        "init_std": config.init_std,
        "seed": config.seed,
        "early_stop_loss": config.early_stop_loss,
    }


def _config_from_json(obj: dict) -> SolverConfig:
    stop = obj["early_stop_loss"]
    return SolverConfig(
        lr=float(obj["lr"]),
        max_iter=int(obj["max_iter"]),
        adam_beta1=float(obj["adam_beta1"]),
        adam_beta2=float(obj["adam_beta2"]),
        adam_eps=float(obj["adam_eps"]),
        init_std=float(obj["init_std"]),
        seed=int(obj["seed"]),
        early_stop_loss=None if stop is None else float(stop),
    )


def write_bundle(
    results: list[list[HeadInitResult]],
    spec: BundleSpec,
    config: SolverConfig,
    path,
    dtype: str = "f64",
) -> None:
    """Serialize solved results byte-deterministically; see the module layout."""
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be one of {tuple(_DTYPES)}, got {dtype!r}")
    if len(results) != spec.layers:
        raise ValueError(f"expected {spec.layers} layers of results, got {len(results)}")
    nd = _DTYPES[dtype]

    table = []
    blobs: list[bytes] = []
    metrics = []
    pos = 0
    for layer, row in enumerate(results):
        if len(row) != spec.heads:
            raise ValueError(
                f"layer {layer}: expected {spec.heads} head results, got {len(row)}"
            )
        for head, res in enumerate(row):
            metrics.append(
                {
                    "layer": layer,
                    "head": head,
                    "final_loss": res.final_loss,
                    "argmax_match_rate": res.argmax_match_rate,
                    "iterations_run": res.iterations_run,
                    "target_offset": None
                    if res.target_offset is None
                    else [res.target_offset.di, res.target_offset.dj],
                }
            )
            for which, arr in (("q", res.params.q), ("k", res.params.k)):
                narrowed = np.ascontiguousarray(arr, dtype=np.float64).astype(nd)
                raw = narrowed.tobytes()
                pad = (-pos) % 8
                if pad:
                    blobs.append(b"\x00" * pad)
                    pos += pad
                table.append(
                    {
                        "name": tensor_name(layer, head, which),
                        "dtype": dtype,
                        "shape": list(narrowed.shape),
                        "offset": pos,
                        "length": len(raw),
                    }
                )
                blobs.append(raw)
                pos += len(raw)

    header = {
        "tensors": table,
        "spec": _spec_to_json(spec),
        "config": _config_to_json(config),
        "metrics": metrics,
    }
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    encoded += b" " * ((-(_PRELUDE.size + len(encoded))) % 8)

    with open(path, "wb") as fh:
        fh.write(_PRELUDE.pack(MAGIC, VERSION, len(encoded)))
        fh.write(encoded)
        for blob in blobs:
            fh.write(blob)


def read_bundle_raw(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse and validate a bundle, returning the header and stored-dtype tensors."""
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < _PRELUDE.size:
        raise ShortPayloadError(f"payload short: {len(data)} bytes is below the fixed prelude")
    magic, version, header_len = _PRELUDE.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    body_start = _PRELUDE.size + header_len
    if len(data) < body_start:
        raise ShortPayloadError(
            f"payload short: header claims {header_len} bytes but only "
            f"{len(data) - _PRELUDE.size} remain"
        )
    try:
        header = json.loads(data[_PRELUDE.size:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"header is not valid UTF-8 JSON: {exc}") from exc

    payload = data[body_start:]
    try:
        entries = list(header["tensors"])
    except (KeyError, TypeError) as exc:
        raise HeaderError(f"malformed tensor table: {exc}") from exc

    tensors: dict[str, np.ndarray] = {}
    spans = []
    for entry in entries:
        try:
            name = entry["name"]
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
            offset = int(entry["offset"])
            length = int(entry["length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderError(f"malformed tensor entry: {exc}") from exc
        if dtype not in _DTYPES:
            raise HeaderError(f"tensor {name!r}: unknown dtype {dtype!r}")
        nd = _DTYPES[dtype]
        count = 1
        for s in shape:
            if s < 0:
                raise HeaderError(f"tensor {name!r}: negative shape entry")
            count *= s
        if length != count * nd.itemsize:
            raise HeaderError(
                f"tensor {name!r}: declared length {length} does not match "
                f"shape {shape} at {nd.itemsize} bytes per scalar"
            )
        if name in tensors:
            raise HeaderError(f"duplicate tensor name {name!r}")
        if offset < 0 or offset + length > len(payload):
            raise ShortPayloadError(
                f"payload short: tensor {name!r} spans [{offset}, {offset + length}) "
                f"but payload holds {len(payload)} bytes"
            )
        spans.append((offset, offset + length, name))
        tensors[name] = np.frombuffer(payload, dtype=nd, count=count, offset=offset).reshape(shape)

    spans.sort()
    for (_, prev_end, prev_name), (start, _, name) in zip(spans, spans[1:]):
        if start < prev_end:
            raise OverlappingTensorError(
                f"tensors {prev_name!r} and {name!r} overlap in the payload"
            )
    return header, tensors


def read_bundle(path) -> tuple[list[list[HeadInitResult]], BundleSpec, SolverConfig]:
    """Reconstruct solved results (tensors upcast to f64), spec, and config."""
    header, raw = read_bundle_raw(path)
    try:
        spec = _spec_from_json(header["spec"])
        config = _config_from_json(header["config"])
        metrics = {(int(m["layer"]), int(m["head"])): m for m in header["metrics"]}
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise HeaderError(f"malformed header: {exc}") from exc

    results = []
    for layer in range(spec.layers):
        row = []
        for head in range(spec.heads):
            qname = tensor_name(layer, head, "q")
            kname = tensor_name(layer, head, "k")
            if qname not in raw or kname not in raw:
                raise HeaderError(f"missing tensors for layer {layer} head {head}")
            if (layer, head) not in metrics:
                raise HeaderError(f"missing metrics for layer {layer} head {head}")
            m = metrics[(layer, head)]
            try:
                offset_pair = m["target_offset"]
                result = HeadInitResult(
                    params=AttentionHeadParams(
                        q=np.ascontiguousarray(raw[qname], dtype=np.float64),
                        k=np.ascontiguousarray(raw[kname], dtype=np.float64),
                    ),
                    target_offset=None
                    if offset_pair is None
                    else ImpulseOffset(int(offset_pair[0]), int(offset_pair[1])),
                    final_loss=float(m["final_loss"]),
                    argmax_match_rate=float(m["argmax_match_rate"]),
                    iterations_run=int(m["iterations_run"]),
                )
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                raise HeaderError(f"malformed metrics for layer {layer} head {head}: {exc}") from exc
            row.append(result)
        results.append(row)
    return results, spec, config
