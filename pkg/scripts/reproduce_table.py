"""Recompute the device parameter table and print the comparison.

    python scripts/reproduce_table.py [--json] [--tolerance 0.05]
"""

import argparse
import sys

from levcool.limits import table_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", help="alternative table fixture")
    ap.add_argument("--tolerance", type=float, default=0.05)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rep = table_report(args.fixture, args.tolerance)
    print(rep.to_json() if args.json else rep.to_text())
    return 1 if rep.failures() else 0


if __name__ == "__main__":
    sys.exit(main())
