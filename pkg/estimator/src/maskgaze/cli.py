"""Minimal trainer CLI: train on / evaluate over a synthesis output dir."""

import argparse
import sys

from .losses import LossConfig
from .model import ModelConfig
from .train import TrainConfig, evaluate, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="maskgaze")
    subs = parser.add_subparsers(dest="command", required=True)

    t = subs.add_parser("train", help="train on a synthesized dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", default=None, help="where to write checkpoint + metrics")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=10)
    t.add_argument("--lr", type=float, default=2e-3)
    t.add_argument("--gamma", type=float, default=0.5)
    t.add_argument("--seed", type=int, default=0)

    e = subs.add_parser("evaluate", help="mean angular error of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)

    args = parser.parse_args(argv)
    if args.command == "train":
        config = TrainConfig(
            model=ModelConfig(seed=args.seed),
            loss=LossConfig(gamma=args.gamma),
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            seed=args.seed,
        )
        _, metrics = train(args.data, config, out_dir=args.out)
        print(f"final train angular error: {metrics[-1][1]:.3f} deg")
        return 0
    if args.command == "evaluate":
        err = evaluate(args.checkpoint, args.data)
        print(f"mean angular error: {err:.3f} deg")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
