"""Command line front end: render --kind KIND --in CSV... --out IMG."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureSpec, render
from .io import SchemaError

EXIT_OK = 0
EXIT_CONFIG = 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render figures from spinecho CSV artifacts",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        type=Path, metavar="CSV")
    parser.add_argument("--out", required=True, type=Path, metavar="IMG")
    parser.add_argument("--manifest", type=Path, default=None,
                        help="run manifest supplying overlay metadata")
    parser.add_argument("--title", default="")
    parser.add_argument("--logy", action="store_true")
    args = parser.parse_args(argv)

    for path in args.inputs:
        if not path.exists():
            print(f"error: input {path} does not exist", file=sys.stderr)
            return EXIT_CONFIG
    if args.manifest is not None and not args.manifest.exists():
        print(f"error: manifest {args.manifest} does not exist", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=list(args.inputs),
            output=args.out,
            manifest=args.manifest,
            title=args.title,
            logy=args.logy,
        )
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    print(out.with_name(out.name + ".points.csv"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
