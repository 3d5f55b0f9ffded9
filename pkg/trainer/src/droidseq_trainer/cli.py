"""Command-line interface: corpus generation and training/export."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .corpus import (SyntheticCorpusSpec, generate_synthetic_corpus,
                     read_corpus, write_corpus)
from .export import export
from .train import TrainingConfig, train


def _cmd_generate(args) -> int:
    spec = SyntheticCorpusSpec(
        vocab_size=args.vocab,
        samples_per_class=args.per_class,
        motifs=tuple(tuple(int(t) for t in m.split(",")) for m in args.motif),
        benign_length=(args.min_len, args.max_len),
        malicious_length=(args.min_len, args.max_len),
        noise_rate=args.noise,
        seed=args.seed,
    )
    samples = generate_synthetic_corpus(spec)
    write_corpus(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}", file=sys.stderr)
    return 0


def _cmd_fit(args) -> int:
    corpus = read_corpus(args.corpus)
    cfg = TrainingConfig(max_len=args.length, batch_size=args.batch_size,
                         learning_rate=args.learning_rate,
                         epochs=args.epochs, seed=args.seed)
    trained = train(corpus, cfg)
    for row in trained.history:
        print(f"epoch {row['epoch']}: loss {row['loss']:.4f} "
              f"train {row['train_accuracy']:.2%} val {row['val_accuracy']:.2%}",
              file=sys.stderr)
    if trained.test_accuracy is not None:
        print(f"test accuracy {trained.test_accuracy:.2%}", file=sys.stderr)

    rng = np.random.default_rng(cfg.seed)
    pool = [ids for _, ids in corpus]
    picks = rng.choice(len(pool), size=max(20, args.references), replace=False)
    export(trained, args.out, args.refs, [pool[i] for i in picks])
    print(f"wrote {args.out} and {args.refs}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droidseq-train",
        description="Train the droidseq classifier and export SQMW weights")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic labeled corpus")
    gen.add_argument("--out", required=True)
    gen.add_argument("--vocab", type=int, default=50)
    gen.add_argument("--per-class", type=int, default=1000)
    gen.add_argument("--motif", action="append", default=None,
                     help="comma-separated ids; repeatable (default 5,9,2)")
    gen.add_argument("--min-len", type=int, default=10)
    gen.add_argument("--max-len", type=int, default=20)
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=_cmd_generate)

    fit = sub.add_parser("fit", help="train on a labeled corpus and export")
    fit.add_argument("corpus")
    fit.add_argument("--out", required=True, help="SQMW output path")
    fit.add_argument("--refs", required=True, help="reference-vector output path")
    fit.add_argument("--length", type=int, default=32)
    fit.add_argument("--batch-size", type=int, default=64)
    fit.add_argument("--learning-rate", type=float, default=1e-3)
    fit.add_argument("--epochs", type=int, default=10)
    fit.add_argument("--references", type=int, default=20)
    fit.add_argument("--seed", type=int, default=0)
    fit.set_defaults(func=_cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "generate" and args.motif is None:
        args.motif = ["5,9,2"]
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
