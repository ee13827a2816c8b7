"""Command line figure renderer: plot --run <dir> --kind <k> --out <file>."""

import argparse
import sys

from .render import KINDS, FigureSpec, render
from .schemas import SchemaVersionError


def build_parser():
    ap = argparse.ArgumentParser(
        prog="semicoupling-plot",
        description="Render figures from a semicoupling run directory",
    )
    ap.add_argument("--run", required=True, help="run directory (pipeline output)")
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--size", type=int, default=512, help="image size in pixels")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        path = render(FigureSpec(run_dir=args.run, kind=args.kind,
                                 out_path=args.out, size=args.size))
    except SchemaVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
