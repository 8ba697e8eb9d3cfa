"""Command line: parity verification and smoke training against a bundle."""

from __future__ import annotations

import argparse
import sys

from .bundleio import BundleLoadError, load_bundle
from .parity import verify_parity, write_report_json
from .smoke import patch_and_smoke_train


class _Parser(argparse.ArgumentParser):
    """Usage problems exit 1; exit 2 is reserved for I/O failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trainbridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parity", help="compare recomputed maps against CSV dumps")
    p.add_argument("--bundle", required=True)
    p.add_argument(
        "--map",
        dest="maps",
        nargs=3,
        metavar=("LAYER", "HEAD", "CSV"),
        action="append",
        required=True,
        help="reference CSV for one head; repeat per head",
    )
    p.add_argument("--threshold", type=float, default=1e-10)
    p.add_argument("--out", default=None, help="write the JSON report here")

    p = sub.add_parser("smoke", help="structured-vs-baseline smoke training")
    p.add_argument("--bundle", required=True)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--subset", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch", type=int, default=4)
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        bundle = load_bundle(args.bundle)
        if args.command == "parity":
            refs = {(int(l), int(h)): path for l, h, path in args.maps}
            report = verify_parity(bundle, refs, args.threshold)
            for entry in report.heads:
                print(
                    f"layer {entry.layer}\thead {entry.head}\t"
                    f"max_abs_deviation {entry.max_abs_deviation:.17e}"
                )
            if args.out is not None:
                write_report_json(report, args.out)
            print("parity: " + ("PASS" if report.passed else "FAIL"))
            return 0 if report.passed else 1
        curves = patch_and_smoke_train(
            bundle, args.epochs, args.subset, args.seed, args.out_dir, patch=args.patch
        )
        for name, info in curves.items():
            last = info["rows"][-1][2] if info["rows"] else float("nan")
            print(f"{name}\tfinal_loss {last:.17e}\t{info['csv']}")
        return 0
    except (BundleLoadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
