"""Sidecar commands: serve the scoring API, fine-tune the verifier on a
negative-sampled training file, or train the neural reranker and emit the
prediction file the pipeline's rerank stage consumes."""
from __future__ import annotations

import argparse
import logging
import sys

from . import training
from .data import DataFileError
from .models import ModelError
from .service import ServiceConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorer-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="Run the batch scoring HTTP service")
    p.add_argument("--relevance", default="untrained:0", help="relevance model identifier")
    p.add_argument("--verify", default="untrained:0", help="verifier model identifier")
    p.add_argument("--port", type=int, default=None, help="overrides SCORER_PORT")
    p.add_argument("--device", default=None, help="overrides SCORER_DEVICE")
    p.add_argument("--max-batch", type=int, default=64)

    p = sub.add_parser("finetune-verifier", help="Fine-tune the verifier on a train file")
    p.add_argument("--train", required=True, help="{claim_id, doc_id, label} JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--tag", default="", help="negative-sampling tag recorded in the checkpoint")
    p.add_argument("--epochs", type=int, default=training.DEFAULT_EPOCHS)
    p.add_argument("--lr", type=float, default=training.DEFAULT_LR)
    p.add_argument("--batch-size", type=int, default=training.DEFAULT_BATCH)
    p.add_argument("--weight-decay", type=float, default=training.DEFAULT_WEIGHT_DECAY)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-reranker", help="Train the neural reranker, emit predictions")
    p.add_argument("--train", required=True, help="{claim_id, doc_id, target, is_gold} JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--out", required=True, help="prediction file path")
    p.add_argument("--candidates", default=None, help="run file of pairs to score (default: train pairs)")
    p.add_argument("--checkpoint", default=None, help="also save the trained model here")
    p.add_argument("--epochs", type=int, default=training.DEFAULT_EPOCHS)
    p.add_argument("--lr", type=float, default=training.DEFAULT_LR)
    p.add_argument("--batch-size", type=int, default=training.DEFAULT_BATCH)
    p.add_argument("--weight-decay", type=float, default=training.DEFAULT_WEIGHT_DECAY)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            kwargs = {
                "relevance_model": args.relevance,
                "verify_model": args.verify,
                "max_batch": args.max_batch,
            }
            if args.port is not None:
                kwargs["port"] = args.port
            if args.device is not None:
                kwargs["device"] = args.device
            serve(ServiceConfig(**kwargs))
        elif args.command == "finetune-verifier":
            training.finetune_verifier(
                args.train, args.corpus, args.claims, args.out,
                tag=args.tag, epochs=args.epochs, lr=args.lr,
                batch_size=args.batch_size, weight_decay=args.weight_decay, seed=args.seed,
            )
            print(f"checkpoint (tag {args.tag or '-'}) -> {args.out}")
        else:
            training.train_neural_reranker(
                args.train, args.corpus, args.claims, args.out,
                candidates_path=args.candidates, checkpoint_path=args.checkpoint,
                epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                weight_decay=args.weight_decay, seed=args.seed,
            )
            print(f"predictions -> {args.out}")
    except (DataFileError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
