"""Command-line front end.

Subcommands:

  solve-init    fit per-head projections for a whole bundle and write it out
  verify-prop1  channel-mixing expressibility sweep, TSV on stdout
  attn-map      recompute one head's attention map from a bundle and render it
  stable-rank   stable-rank estimate of a CSV matrix
  make-target   dump one impulse convolution matrix as CSV

Exit codes: 0 success, 1 validation or usage error, 2 I/O error. Scalars are
printed as ``%.17e`` so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import bundle as bundle_io
from . import gridconv, imaging, prop1, pseudo, solver
from .attention import attention_map
from .linalg import layer_norm_rows, stable_rank

_PADDING_FLAGS = {"circular": gridconv.CIRCULAR, "zero-self": gridconv.ZERO_SELF}
_SHARING_FLAGS = {"same": solver.SAME_ALL_LAYERS, "per-layer": solver.PER_LAYER}
_FILTER_FLAGS = {
    "random": prop1.RANDOM,
    "impulse": prop1.IMPULSE_BALANCED,
    "box": prop1.BOX,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(value: float) -> str:
    return imaging.format_scalar(value)


def _build_parser() -> _Parser:
    parser = _Parser(prog="convinit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-init", help="solve a bundle of head fits")
    p.add_argument("--grid", type=int, nargs=2, metavar=("H", "W"), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--heads", type=int, required=True)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--filter-size", type=int, default=3)
    p.add_argument("--padding", choices=sorted(_PADDING_FLAGS), default="circular")
    p.add_argument("--pseudo-first", choices=pseudo.KINDS, default=pseudo.PE)
    p.add_argument("--pseudo-rest", choices=pseudo.KINDS, default=pseudo.PE)
    p.add_argument("--sharing", choices=sorted(_SHARING_FLAGS), default="same")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--early-stop-loss", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--f32", action="store_true", help="narrow stored tensors to f32")
    p.set_defaults(func=_cmd_solve_init)

    p = sub.add_parser("verify-prop1", help="expressibility residual sweep")
    p.add_argument("--grid", type=int, nargs=2, metavar=("H", "W"), required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--d-min", type=int, required=True)
    p.add_argument("--d-max", type=int, required=True)
    p.add_argument("--filters", choices=sorted(_FILTER_FLAGS), default="impulse")
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(func=_cmd_verify_prop1)

    p = sub.add_parser("attn-map", help="render one head's attention map")
    p.add_argument("--bundle", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--head", type=int, required=True)
    p.add_argument("--pseudo", choices=pseudo.KINDS, default=None,
                   help="override the bundle's pseudo-input kind")
    p.add_argument("--out", required=True, help="output path, .pgm or .csv")
    p.set_defaults(func=_cmd_attn_map)

    p = sub.add_parser("stable-rank", help="stable rank of a CSV matrix")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_stable_rank)

    p = sub.add_parser("make-target", help="dump an impulse convolution matrix")
    p.add_argument("--grid", type=int, nargs=2, metavar=("H", "W"), required=True)
    p.add_argument("--offset", type=int, nargs=2, metavar=("DI", "DJ"), required=True)
    p.add_argument("--padding", choices=sorted(_PADDING_FLAGS), default="circular")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_target)

    return parser


def _cmd_solve_init(args) -> int:
    spec = solver.BundleSpec(
        layers=args.layers,
        heads=args.heads,
        dim=args.dim,
        grid=gridconv.GridShape(args.grid[0], args.grid[1]),
        filter_size=args.filter_size,
        sharing=_SHARING_FLAGS[args.sharing],
        pseudo_first=args.pseudo_first,
        pseudo_rest=args.pseudo_rest,
        padding=_PADDING_FLAGS[args.padding],
    )
    config = solver.SolverConfig(
        lr=args.lr,
        max_iter=args.max_iter,
        seed=args.seed,
        early_stop_loss=args.early_stop_loss,
    )
    results = solver.solve_bundle(spec, config)
    bundle_io.write_bundle(results, spec, config, args.out, dtype="f32" if args.f32 else "f64")
    print("layer\thead\toffset_di\toffset_dj\tfinal_loss\tmatch_rate")
    for layer, row in enumerate(results):
        for head, res in enumerate(row):
            off = res.target_offset
            print(
                f"{layer}\t{head}\t{off.di}\t{off.dj}\t"
                f"{_fmt(res.final_loss)}\t{_fmt(res.argmax_match_rate)}"
            )
    return 0


def _cmd_verify_prop1(args) -> int:
    rows = prop1.residual_sweep(
        grid=gridconv.GridShape(args.grid[0], args.grid[1]),
        rank=args.k,
        filter_size=args.f,
        d_min=args.d_min,
        d_max=args.d_max,
        filter_kind=_FILTER_FLAGS[args.filters],
        seeds=args.seeds,
    )
    print("dim\tseed\tsystem_rank\tcondition_holds\tresidual")
    for row in rows:
        cond = 1 if row.condition_holds else 0
        print(f"{row.dim}\t{row.seed}\t{row.system_rank}\t{cond}\t{_fmt(row.residual)}")
    return 0


def _cmd_attn_map(args) -> int:
    results, spec, config = bundle_io.read_bundle(args.bundle)
    if not 0 <= args.layer < spec.layers:
        raise ValueError(f"layer {args.layer} out of range for {spec.layers} layers")
    if not 0 <= args.head < spec.heads:
        raise ValueError(f"head {args.head} out of range for {spec.heads} heads")
    pin = solver.pseudo_for_layer(spec, config.seed, args.layer, kind=args.pseudo)
    x_tilde = layer_norm_rows(pin.matrix)
    amap = attention_map(x_tilde, results[args.layer][args.head].params)
    out = str(args.out)
    if out.endswith(".pgm"):
        imaging.render_attention_pgm(amap, out)
    elif out.endswith(".csv"):
        imaging.write_matrix_csv(amap.matrix, out)
    else:
        raise ValueError(f"output extension must be .pgm or .csv, got {out!r}")
    return 0


def _cmd_stable_rank(args) -> int:
    matrix = imaging.read_matrix_csv(args.csv)
    print(_fmt(stable_rank(matrix)))
    return 0


def _cmd_make_target(args) -> int:
    target = gridconv.impulse_conv_matrix(
        gridconv.ImpulseOffset(args.offset[0], args.offset[1]),
        gridconv.GridShape(args.grid[0], args.grid[1]),
        _PADDING_FLAGS[args.padding],
    )
    imaging.write_matrix_csv(target.matrix, args.out)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except solver.SolverDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, bundle_io.BundleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
