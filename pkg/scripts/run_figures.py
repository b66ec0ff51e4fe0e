#!/usr/bin/env python
"""Regenerate the optimized-throughput sweep CSVs for all canned presets.

Each CSV holds one row per (sweep value, scheme) with the optimal policy and
its throughput; see `ehcog sweep --help` for the underlying command.
"""
import argparse
import pathlib
import sys

from ehcog.cli import main
from ehcog.presets import PRESETS


def cli() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--presets", nargs="*", default=sorted(PRESETS))
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rc = 0
    for name in args.presets:
        out = outdir / f"{name}_sweep.csv"
        argv = ["sweep", "--preset", name, "--out", str(out)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        rc = max(rc, main(argv))
        print(f"{name}: {out}")
    return rc


if __name__ == "__main__":
    sys.exit(cli())
