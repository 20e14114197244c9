"""Command line: render <results.csv> --figure {n,newpct,gamma,rho} --out <dir>."""
import argparse
import sys

from .figures import FAMILIES, render, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opl-render",
        description="Render benchmark figures from a results CSV",
    )
    parser.add_argument("csv", help="results CSV produced by the experiment runner")
    parser.add_argument("--figure", choices=sorted(FAMILIES) + ["all"], required=True,
                        help="figure family to render")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", default="png", choices=["png", "pdf", "svg"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.figure == "all":
            results = render_all(args.csv, args.out, fmt=args.format)
        else:
            results = [render(args.csv, args.figure, args.out, fmt=args.format)]
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for result in results:
        if result.path is not None:
            print(f"wrote {result.path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
