"""Script entry points: ``viz-convergence`` and ``viz-history``.

Both take ``--in`` (a CSV produced by the simulator) and ``--out`` (the
image path; the extension selects the format, e.g. .png or .svg).
Exit codes: 0 success, 2 schema/validation error.
"""
from __future__ import annotations

import argparse
import sys

from .plots import render_convergence_plot, render_history_plot
from .tables import HistoryTable, SchemaError, SweepTable


def _parser(description: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="in_path", required=True,
                        help="input CSV")
    parser.add_argument("--out", dest="out_path", required=True,
                        help="output image (.png, .svg, ...)")
    return parser


def main_convergence(argv=None) -> int:
    args = _parser("Render a log-log convergence figure from a sweep "
                   "CSV.").parse_args(argv)
    try:
        table = SweepTable.from_csv(args.in_path)
        path = render_convergence_plot(table, args.out_path)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


def main_history(argv=None) -> int:
    args = _parser("Render a monitor/norm history figure from a "
                   "time-series CSV.").parse_args(argv)
    try:
        table = HistoryTable.from_csv(args.in_path)
        path = render_history_plot(table, args.out_path)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main_convergence())
