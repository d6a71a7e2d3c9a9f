"""Command-line front end for figure rendering."""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from .io import FigureInputError
from .render import FIGURE_KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trihalo-figures",
        description="Render convergence/runtime figures from trihalo harness CSV files",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--csv", nargs="+", required=True, help="harness CSV input file(s)")
    parser.add_argument("--output", required=True, help="image file to write (png/pdf/svg)")
    parser.add_argument("--guides", type=int, nargs="+", default=[2, 3, 4],
                        help="h^g guide orders for convergence figures")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    spec = FigureSpec(
        csv_paths=tuple(args.csv),
        kind=args.kind,
        output=args.output,
        guide_orders=tuple(args.guides),
    )
    try:
        fig = render(spec)
        plt.close(fig)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
