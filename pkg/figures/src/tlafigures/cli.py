"""Standalone figure-rendering entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlamonitor-fig",
        description="Render trajectory / sweep figures from tlamonitor CSVs")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--input", required=True, help="trajectory or sweep CSV")
    parser.add_argument("--events", default=None,
                        help="events CSV with avalanche times (APD figures)")
    parser.add_argument("--output", required=True, help="output image path")
    parser.add_argument("--xlim", type=float, nargs=2, default=None,
                        metavar=("T0", "T1"))
    parser.add_argument("--zoom-halfwidth", type=float, default=1.0,
                        help="half-width of the avalanche zoom panel")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, input_path=Path(args.input),
                      output_path=Path(args.output),
                      events_path=Path(args.events) if args.events else None,
                      xlim=tuple(args.xlim) if args.xlim else None,
                      zoom_halfwidth=args.zoom_halfwidth)
    try:
        out = render(spec)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
