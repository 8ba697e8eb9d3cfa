"""Convolution-structured initialization toolkit for multi-head softmax attention.

The package fits query/key projections so that a transformer's initial
attention maps reproduce chosen impulse convolution matrices, verifies the
channel-mixing expressibility threshold by brute force, and ships the solved
weights in a bit-exact binary bundle.
"""

from .attention import AttentionHeadParams, AttentionMap, attention_map, spatial_mix
from .bundle import (
    BadMagicError,
    BundleError,
    HeaderError,
    OverlappingTensorError,
    ShortPayloadError,
    UnsupportedVersionError,
    read_bundle,
    read_bundle_raw,
    tensor_name,
    write_bundle,
)
from .gridconv import (
    CIRCULAR,
    ZERO_SELF,
    ConvMatrix,
    Filter,
    GridShape,
    ImpulseOffset,
    all_impulse_offsets,
    build_conv_matrix,
    impulse_conv_matrix,
    make_filter,
    sample_impulse_offsets,
)
from .imaging import (
    attention_pixels,
    format_scalar,
    read_matrix_csv,
    render_attention_pgm,
    write_matrix_csv,
)
from .linalg import (
    ShapeError,
    SingularSpectrumEstimate,
    layer_norm_rows,
    singular_spectrum,
    softmax_rows,
    stable_rank,
)
from .prop1 import (
    ExpressibilityReport,
    Prop1Instance,
    SweepRow,
    build_instance,
    expressibility_residual,
    output_equivalence_check,
    random_targets,
    residual_sweep,
)
from .pseudo import PseudoInput, make_pseudo_input, mix_pe_noise, noise_input, sinusoidal_pe
from .rng import SplitMix64, derive_seed
from .solver import (
    BundleSpec,
    HeadInitResult,
    SolverConfig,
    SolverDivergedError,
    loss,
    loss_and_grad,
    pseudo_for_layer,
    solve_bundle,
    solve_head,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionHeadParams",
    "AttentionMap",
    "BadMagicError",
    "BundleError",
    "BundleSpec",
    "CIRCULAR",
    "ConvMatrix",
    "ExpressibilityReport",
    "Filter",
    "GridShape",
    "HeadInitResult",
    "HeaderError",
    "ImpulseOffset",
    "OverlappingTensorError",
    "Prop1Instance",
    "PseudoInput",
    "ShapeError",
    "ShortPayloadError",
    "SingularSpectrumEstimate",
    "SolverConfig",
    "SolverDivergedError",
    "SplitMix64",
    "SweepRow",
    "UnsupportedVersionError",
    "ZERO_SELF",
    "all_impulse_offsets",
    "attention_map",
    "attention_pixels",
    "build_conv_matrix",
    "build_instance",
    "derive_seed",
    "expressibility_residual",
    "format_scalar",
    "impulse_conv_matrix",
    "layer_norm_rows",
    "loss",
    "loss_and_grad",
    "make_filter",
    "make_pseudo_input",
    "mix_pe_noise",
    "noise_input",
    "output_equivalence_check",
    "pseudo_for_layer",
    "random_targets",
    "read_bundle",
    "read_bundle_raw",
    "read_matrix_csv",
    "render_attention_pgm",
    "residual_sweep",
    "sample_impulse_offsets",
    "singular_spectrum",
    "sinusoidal_pe",
    "softmax_rows",
    "solve_bundle",
    "solve_head",
    "spatial_mix",
    "stable_rank",
    "tensor_name",
    "write_bundle",
    "write_matrix_csv",
]
