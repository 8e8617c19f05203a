"""weightconv command line: convert checkpoints, emit parity vectors."""

from __future__ import annotations

import argparse
import sys

from .convert import convert, emit_test_vector
from .maps import ARCHES, ConversionError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weightconv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="checkpoint -> SRWT1")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--arch", required=True, choices=ARCHES)
    p.add_argument("--out", required=True)

    p = sub.add_parser("emit-vector", help="write a forward-pass parity vector")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--arch", required=True, choices=ARCHES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            config = convert(args.checkpoint, args.arch, args.out)
            print(f"wrote {args.out} ({args.arch}, config {config})")
        else:
            meta = emit_test_vector(args.checkpoint, args.arch, args.seed, args.out)
            print(f"wrote {args.out} (seed {meta['seed']}, {meta['output_space']})")
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
