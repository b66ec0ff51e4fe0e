#!/usr/bin/env python
"""Cross-check every closed form against the slot simulator.

Runs `ehcog validate` (closed-form residuals at 3 standard errors plus the
exact-vs-backlogged lower-bound ordering) on a few canned operating points.
Exit code is nonzero if any check at a stable point fails.
"""
import argparse
import sys

from ehcog.cli import main

POINTS = (
    ("fig4", []),
    ("fig4", ["--scheme", "feedback"]),
    ("fig7", []),
    ("fig8", ["--scheme", "feedback"]),
)


def cli() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slots", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    worst = 0
    for preset, extra in POINTS:
        print(f"== {preset} {' '.join(extra)}".rstrip())
        rc = main(
            ["validate", "--preset", preset, "--slots", str(args.slots),
             "--seed", str(args.seed), *extra]
        )
        worst = max(worst, rc)
        print()
    return worst


if __name__ == "__main__":
    sys.exit(cli())
