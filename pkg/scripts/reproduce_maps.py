"""Frequency x modulation classification maps for the four LUT/NLM methods.

Writes map_<method>.csv, sweep_summary.txt and a grey-level map_<method>.pgm
(black Ideal, grey LFOscillation, white DCBias; frequency left to right,
m bottom to top).

    python3 scripts/reproduce_maps.py --out results/maps
    python3 scripts/reproduce_maps.py --grid full --methods improved_adaptive
"""
import argparse
import os
import time

import numpy as np

from cbcsim.analysis import DCBIAS, IDEAL, LFOSC
from cbcsim.scenarios.config import RunConfig, load_config, with_overrides
from cbcsim.scenarios.sweep import run_sweep

SHADE = {IDEAL: 0, LFOSC: 128, DCBIAS: 255}


def write_map_pgm(cells, f_values, m_values, path):
    fi = {float(f): j for j, f in enumerate(f_values)}
    mi = {round(float(m), 10): j for j, m in enumerate(m_values)}
    img = np.zeros((len(m_values), len(f_values)), dtype=np.uint8)
    for c in cells:
        img[len(m_values) - 1 - mi[round(c.m, 10)], fi[c.f]] = SHADE[c.category]
    with open(path, "wb") as fh:
        fh.write(f"P5 {img.shape[1]} {img.shape[0]} 255\n".encode())
        fh.write(img.tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config")
    ap.add_argument("--grid", choices=["desk", "full"], default="desk")
    ap.add_argument("--methods", help="comma list; default all four")
    ap.add_argument("--out", default="results/maps")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else RunConfig()
    kw = {"grid": args.grid}
    if args.methods:
        kw["methods"] = args.methods
    cfg = with_overrides(cfg, "sweep", **kw)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    res = run_sweep(cfg, args.out)
    f_values, m_values = cfg.sweep.f_values(), cfg.sweep.m_values()
    for method, cells in res.cells.items():
        write_map_pgm(cells, f_values, m_values, os.path.join(args.out, f"map_{method}.pgm"))
        cnt = res.counts(method)
        share = ", ".join(f"{k} {cnt.get(k, 0) / len(cells):.1%}" for k in (IDEAL, DCBIAS, LFOSC))
        print(f"{method:18s} {share}  ({res.seconds[method]:.1f} s)")
    print(f"done in {time.perf_counter() - t0:.1f} s -> {args.out}")


if __name__ == "__main__":
    main()
