#!/usr/bin/env python3
"""Run the symmetry property-verification suite and print one line per check.

Covers the quasi-equivariance witness (monomial and GL), cocycle
normalization and composition, gauge transforms, coboundary reduction to
a strictly equivariant map, stabilizer consistency, two-layer
composition, and a deliberately broken cocycle that must be caught.
"""

import argparse
import sys
from pathlib import Path

from weightsym.propverify import format_reports, run_suite


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=5,
                    help="random (params, group element) draws per check")
    ap.add_argument("--csv", type=Path, default=None,
                    help="optional CSV path for the report table")
    args = ap.parse_args()

    reports = run_suite(seed=args.seed, samples=args.samples,
                        csv_path=args.csv)
    print(format_reports(reports))
    sys.exit(0 if all(r.passed for r in reports) else 1)


if __name__ == "__main__":
    main()
