"""Run every scenario with one config into sibling output directories.

    python3 scripts/run_all.py --out results [--config scripts/example.cfg] [--skip sweep]
"""
import argparse
import os
import sys

from cbcsim import cli

SCENARIOS = ("simulate", "chirp", "mix", "message", "sweep")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results")
    ap.add_argument("--skip", default="", help="comma list of scenarios to skip")
    args = ap.parse_args()
    skip = {s.strip() for s in args.skip.split(",") if s.strip()}
    status = 0
    for name in SCENARIOS:
        if name in skip:
            continue
        argv = [name, "--out", os.path.join(args.out, name)]
        if args.config:
            argv += ["--config", args.config]
        print(f"== {name}")
        status = cli.main(argv) or status
    return status


if __name__ == "__main__":
    sys.exit(main())
