"""Command-line entry points: train a model, serve a model."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ServiceError
from .server import DEFAULT_MAX_BATCH, create_app
from .training import TrainHyperparams, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finetune-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fine-tune on a training-sample file")
    p_train.add_argument("--samples", required=True)
    p_train.add_argument("--out", required=True, help="model artifact directory")
    p_train.add_argument("--base-model", default=TrainHyperparams.base_model)
    p_train.add_argument("--neg", type=int, default=TrainHyperparams.negatives)
    p_train.add_argument("--lr", type=float, default=TrainHyperparams.learning_rate)
    p_train.add_argument(
        "--warmup", type=float, default=TrainHyperparams.warmup_ratio
    )
    p_train.add_argument("--tau", type=float, default=TrainHyperparams.tau)
    p_train.add_argument("--epochs", type=int, default=TrainHyperparams.epochs)
    p_train.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="serve /embed from a model artifact")
    p_serve.add_argument("--model-dir", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8230)
    p_serve.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)
    p_serve.add_argument(
        "--raw",
        action="store_true",
        help="serve raw vectors instead of unit-normalized ones",
    )
    return parser


def run_command(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "train":
            hyper = TrainHyperparams(
                negatives=args.neg,
                learning_rate=args.lr,
                warmup_ratio=args.warmup,
                tau=args.tau,
                epochs=args.epochs,
                base_model=args.base_model,
            )
            report = train(args.samples, hyper, args.out, seed=args.seed)
            print(
                f"trained on {report.trained_samples} samples: "
                f"fixed-batch loss {report.eval_loss_before:.6f} -> "
                f"{report.eval_loss_after:.6f}; saved to {report.out_dir}"
            )
            return 0
        if args.command == "serve":
            import uvicorn

            app = create_app(
                args.model_dir, max_batch=args.max_batch, normalize=not args.raw
            )
            uvicorn.run(app, host=args.host, port=args.port)
            return 0
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_command())
