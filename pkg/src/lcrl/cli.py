"""Command line driver: train / sweep / dump-repr over YAML run configs."""

from __future__ import annotations

import argparse
import os
import sys

# must be set before numpy loads BLAS; the workloads are small-matrix bound
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from .errors import LcrlError
from .harness import (
    build_network_for_config,
    dump_representations,
    load_checkpoint,
    load_config,
    run_experiment,
    run_sweep,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one experiment from a config file")
    train.add_argument("--config", required=True)
    train.add_argument("--out", default=None, help="output directory (default: config out_dir)")
    train.add_argument("--seed", type=int, default=None, help="override the master seed")

    sweep = sub.add_parser("sweep", help="run the experiment once per hyperparameter value")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", required=True,
                       choices=("gradient_steps", "k", "lcr_learning_rate", "lcr_batch_size"))
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--seed", type=int, default=None)

    dump = sub.add_parser("dump-repr", help="dump encoder representations along random trajectories")
    dump.add_argument("--config", required=True)
    dump.add_argument("--model", required=True, help="checkpoint written by train")
    dump.add_argument("--trajectories", type=int, default=20)
    dump.add_argument("--out", default="representations.csv")
    dump.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.master_seed = args.seed
        if args.command == "train":
            path = run_experiment(config, out_dir=args.out)
            print(path)
        elif args.command == "sweep":
            raw = [v for v in args.values.split(",") if v]
            values = [float(v) if args.param == "lcr_learning_rate" else int(v) for v in raw]
            for path in run_sweep(config, args.param, values, out_dir=args.out):
                print(path)
        elif args.command == "dump-repr":
            network = build_network_for_config(config)
            load_checkpoint(args.model, network)
            path, rows = dump_representations(
                network, config.env, args.trajectories, config.master_seed, args.out
            )
            print(f"{path} ({rows} rows)")
    except LcrlError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
