"""Command line front end: plotkit <figure-kind> --in <csv...> --out <png/svg>."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render


def build_parser():
    p = argparse.ArgumentParser(prog="plotkit",
                                description="figures from game-lab outputs")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in FIGURE_KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input CSV file(s)")
        sp.add_argument("--out", dest="output", required=True,
                        help="output image path (.png or .svg)")
        sp.add_argument("--title", default="")
        sp.add_argument("--xlabel", default="")
        sp.add_argument("--ylabel", default="")
        sp.add_argument("--labels", nargs="*", default=[],
                        help="legend labels matching the input files")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs, output=args.output,
                          title=args.title, xlabel=args.xlabel,
                          ylabel=args.ylabel, labels=tuple(args.labels))
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
