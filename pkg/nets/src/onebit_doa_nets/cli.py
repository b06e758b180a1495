"""CLI for the unrolled networks: train, eval, export."""

from __future__ import annotations

import argparse
import json
import sys

from .models import NetConfig
from .training import evaluate_export, train


def _net_config(args) -> NetConfig:
    return NetConfig(
        depth=args.depth,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
    )


def _cmd_train(args) -> int:
    ckpt, log = train(args.dataset, _net_config(args), kind=args.kind, out_dir=args.out)
    print(f"wrote {ckpt} and metrics.json "
          f"(final val_bce {log['epochs'][-1]['val_bce']:.4f})")
    return 0


def _cmd_eval(args) -> int:
    metrics = evaluate_export(args.checkpoint, args.dataset, args.predictions)
    print(json.dumps(metrics, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="onebit-doa-nets",
        description="Toy-scale deep-unrolled networks for one-bit DOA estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network on a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", default="sbri", choices=["sbri", "sbri_x"])
    p.add_argument("--out", default=None)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    for name, help_text in (
        ("eval", "evaluate a checkpoint and export predictions"),
        ("export", "alias of eval: write predictions.bin for a dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--predictions", required=True)
        p.set_defaults(func=_cmd_eval)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
