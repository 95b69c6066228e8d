"""Command line entry point: ``python -m cbcsim <subcommand> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

from .fixedpoint import QFormat
from .scenarios.config import ConfigError, RunConfig, documented_keys, load_config, with_overrides


GLOBAL_DEFAULTS = {"config": None, "out": "results", "seed": None, "fclock": None, "levels": None,
                   "qformat": None}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS so a flag given before or after the subcommand is not reset
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="INI-style config file")
    common.add_argument("--out", help="output directory (default: results)")
    common.add_argument("--seed", type=int, help="seed for the random bitmap only")
    common.add_argument("--fclock", type=float, help="controller clock in Hz")
    common.add_argument("--levels", type=int, help="maximum level magnitude")
    common.add_argument("--qformat", help="sample format as total,frac (e.g. 18,14)")

    ap = argparse.ArgumentParser(prog="cbcsim", description=__doc__, parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    sw = sub.add_parser("sweep", parents=[common], help="frequency x modulation classification maps")
    sw.add_argument("--grid", choices=["desk", "full"], help="desk (21 x 200) or full (101 x 5000)")
    sw.add_argument("--methods", help="comma list of conventional,inherited,improved,improved_adaptive")
    sub.add_parser("chirp", parents=[common], help="exponential sweep through the converter")
    sub.add_parser("mix", parents=[common], help="multichannel mixture")
    ms = sub.add_parser("message", parents=[common], help="bitmap in the current spectrogram")
    ms.add_argument("--bitmap", help="'arecibo', 'random', or a file of 0/1 rows")
    si = sub.add_parser("simulate", parents=[common], help="raw single-tone run")
    si.add_argument("--f", type=float, dest="f_o", help="output frequency in Hz")
    si.add_argument("--m", type=float, help="modulation factor")
    si.add_argument("--method", help="conventional, inherited, improved or improved_adaptive")
    si.add_argument("--cycles", type=int)
    sub.add_parser("keys", help="print every accepted config key with its default")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.fclock is not None:
        cfg = with_overrides(cfg, "synth", f_clock=args.fclock)
    if args.qformat is not None:
        fmt = QFormat.parse(args.qformat)
        cfg = with_overrides(cfg, "synth", qformat=f"{fmt.total_bits},{fmt.frac_bits}")
    if args.levels is not None:
        cfg = with_overrides(cfg, "modulation", n_levels=args.levels)
        if args.levels > cfg.converter.n_modules:
            cfg = with_overrides(cfg, "converter", n_modules=args.levels)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    cmd = args.command
    if cmd == "sweep":
        kw = {k: v for k, v in (("grid", args.grid), ("methods", args.methods)) if v is not None}
        cfg = with_overrides(cfg, "sweep", **kw) if kw else cfg
    elif cmd == "message" and args.bitmap:
        cfg = with_overrides(cfg, "message", bitmap=args.bitmap)
    elif cmd == "simulate":
        kw = {k: getattr(args, k) for k in ("f_o", "m", "method", "cycles") if getattr(args, k) is not None}
        cfg = with_overrides(cfg, "simulate", **kw) if kw else cfg
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    if args.command == "keys":
        for section, keys in documented_keys().items():
            print(f"[{section}]")
            for k, v in keys.items():
                print(f"{k} = {v}")
            print()
        return 0
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        os.makedirs(args.out, exist_ok=True)
        if not os.access(args.out, os.W_OK):
            raise OSError(f"output directory {args.out} is not writable")
    except OSError as e:
        print(f"output error: {e}", file=sys.stderr)
        return 3
    t0 = time.perf_counter()
    try:
        if args.command == "sweep":
            from .scenarios.sweep import run_sweep
            res = run_sweep(cfg, args.out)
            for m in res.cells:
                print(m, dict(res.counts(m)))
        elif args.command == "chirp":
            from .scenarios.chirp import run_chirp
            res = run_chirp(cfg, args.out)
            print(f"max voltage distortion {res.max_distortion:.4f}, peak {res.peak_voltage:.3f} V")
        elif args.command == "mix":
            from .scenarios.mix import run_mix
            res = run_mix(cfg, args.out)
            print(f"peak {abs(res.sim.v_out).max():.3f} V, clamps {res.clamps}")
        elif args.command == "message":
            from .scenarios.message import run_message
            res = run_message(cfg, args.out)
            print(f"pixel accuracy {res.accuracy:.4f}")
        elif args.command == "simulate":
            from .scenarios.single import run_simulate
            res = run_simulate(cfg, args.out)
            print(f"category {res.level_class.category}")
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} in {time.perf_counter() - t0:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
