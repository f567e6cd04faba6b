"""`figures --spec <file>`: render one figure from metrics CSVs."""

import argparse
import sys

from .render import FigureError, parse_spec, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="figures", description="render convergence/ablation figures from metrics CSVs"
    )
    parser.add_argument("--spec", required=True, help="figure spec file (INI)")
    args = parser.parse_args(argv)
    try:
        spec = parse_spec(args.spec)
        out = render(spec)
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 1
    print(f"figures: wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
