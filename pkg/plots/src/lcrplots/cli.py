"""CLI: lcrplot curves|sensitivity --out <png> <files...>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .curves import CurveSpec, PlotError, plot_learning_curves, plot_sensitivity, sweep_value_from_name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcrplot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    curves = sub.add_parser("curves", help="banded learning curves, one per metrics file")
    curves.add_argument("files", nargs="+")
    curves.add_argument("--out", required=True)
    curves.add_argument("--labels", default=None, help="comma-separated, defaults to file stems")
    curves.add_argument("--smooth", type=int, default=100)
    curves.add_argument("--no-epsilon", action="store_true", help="skip the dotted epsilon overlay")
    curves.add_argument("--title", default=None)

    sens = sub.add_parser("sensitivity", help="one curve per swept hyperparameter value")
    sens.add_argument("files", nargs="+", help="sweep outputs named metrics_<param>_<value>.csv")
    sens.add_argument("--out", required=True)
    sens.add_argument("--param", default=None, help="parameter name (default: from filenames)")
    sens.add_argument("--smooth", type=int, default=100)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "curves":
            if args.labels:
                labels = args.labels.split(",")
                if len(labels) != len(args.files):
                    raise PlotError(f"{len(labels)} labels for {len(args.files)} files")
            else:
                labels = [Path(f).stem for f in args.files]
            spec = CurveSpec(
                curves=[(f, lab, None) for f, lab in zip(args.files, labels)],
                smoothing_window=args.smooth,
                output=args.out,
                show_epsilon=not args.no_epsilon,
                title=args.title,
            )
            print(plot_learning_curves(spec))
        else:
            by_value = {}
            for f in args.files:
                value = sweep_value_from_name(f)
                if value in by_value:
                    raise PlotError(f"duplicate sweep value {value} ({f} and {by_value[value]})")
                by_value[value] = f
            param = args.param
            if param is None:
                stem = Path(args.files[0]).stem  # metrics_<param>_<value>
                param = stem[len("metrics_"):].rsplit("_", 1)[0] if stem.startswith("metrics_") else "value"
            print(plot_sensitivity(by_value, param, args.out, smoothing_window=args.smooth))
    except (PlotError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
