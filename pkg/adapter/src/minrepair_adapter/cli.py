"""Command-line entry point: serve the protocol, export a replay file,
build the tiny test checkpoint, or run the optional fine-tune driver."""

from __future__ import annotations

import argparse
import sys

from .sampler import AdapterConfig


def _add_sampling_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", required=True,
                        help="local checkpoint directory or hub identifier")
    parser.add_argument("--temperature", type=float, default=0.7)
    parser.add_argument("--max-tokens", type=int, default=256)
    parser.add_argument("--n-samples", type=int, default=100)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--seed", type=int, default=None)


def _config(args: argparse.Namespace) -> AdapterConfig:
    return AdapterConfig(
        checkpoint=args.checkpoint,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        n_samples=args.n_samples,
        device=args.device,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minrepair-adapter",
        description="Model-backed candidate generator for the minrepair harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="speak the generator protocol on stdio")
    _add_sampling_flags(sp)

    sp = sub.add_parser("export", help="write a replay candidates file for a pairs file")
    _add_sampling_flags(sp)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("make-tiny", help="create a tiny random checkpoint for testing")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("finetune", help="optional: fine-tune a checkpoint on a pairs file")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=float, default=3.0)
    sp.add_argument("--batch-size", type=int, default=8)
    sp.add_argument("--learning-rate", type=float, default=5e-5)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "serve":
        from .protocol import serve
        return serve(_config(args))
    if args.command == "export":
        from .protocol import export_candidates
        return export_candidates(args.pairs, _config(args), args.out)
    if args.command == "make-tiny":
        from .tiny import make_tiny_checkpoint
        path = make_tiny_checkpoint(args.out, seed=args.seed)
        print(f"wrote tiny checkpoint to {path}", file=sys.stderr)
        return 0
    if args.command == "finetune":
        from .finetune import finetune
        return finetune(args.checkpoint, args.pairs, args.out,
                        epochs=args.epochs, batch_size=args.batch_size,
                        learning_rate=args.learning_rate)
    return 2


if __name__ == "__main__":
    sys.exit(main())
