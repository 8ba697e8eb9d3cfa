"""Bridge between the weight-bundle format and a PyTorch training setup."""

from .bundleio import BundleLoadError, LoadedBundle, load_bundle
from .parity import HeadParity, ParityReport, read_matrix_csv, verify_parity, write_report_json
from .recompute import (
    bundle_attention_map,
    head_attention_map,
    layer_norm_rows,
    pseudo_input,
    sinusoidal_pe,
)
from .smoke import patch_and_smoke_train, synthetic_dataset, train_model, write_loss_csv
from .vit import (
    TinyViT,
    argmax_agreement,
    build_model,
    parameter_audit,
    patch_qk,
)

__all__ = [
    "BundleLoadError",
    "HeadParity",
    "LoadedBundle",
    "ParityReport",
    "TinyViT",
    "argmax_agreement",
    "build_model",
    "bundle_attention_map",
    "head_attention_map",
    "layer_norm_rows",
    "load_bundle",
    "parameter_audit",
    "patch_and_smoke_train",
    "patch_qk",
    "pseudo_input",
    "read_matrix_csv",
    "sinusoidal_pe",
    "synthetic_dataset",
    "train_model",
    "verify_parity",
    "write_loss_csv",
    "write_report_json",
]
