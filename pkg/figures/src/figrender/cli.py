"""Command line entry point: render --kind K --input CSV --out IMAGE."""

from __future__ import annotations

import argparse
import sys

from .jobs import KINDS, FigureError, FigureJob
from .render import RENDERERS

EXIT_OK = 0
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a figure from an infectree output CSV.")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--input", required=True,
                        help="CSV produced by the infectree CLI "
                             "(sidecar .config.json must sit next to it)")
    parser.add_argument("--out", required=True,
                        help="output image path (.png or .svg)")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = FigureJob(input_path=args.input, kind=args.kind,
                        output_path=args.out, style={"dpi": args.dpi})
        path = RENDERERS[args.kind](job)
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
