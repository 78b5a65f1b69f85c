"""Command line for rendering sweep CSVs: plot --csv <file> --r <x> --out <img>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .render import PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outage-plot",
        description="Render an outage-vs-SNR chart (log y) from a sweep CSV",
    )
    parser.add_argument("--csv", required=True, help="sweep CSV file")
    parser.add_argument("--r", required=True, type=float,
                        help="multiplexing gain to select")
    parser.add_argument("--out", required=True,
                        help="output image; format inferred from the extension")
    parser.add_argument("--title", help="chart title (default built from the data)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(csv_path=Path(args.csv), r=args.r, out_path=Path(args.out),
                    title=args.title)
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
