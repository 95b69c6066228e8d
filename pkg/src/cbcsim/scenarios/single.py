"""Single-tone run: one method, one (f, m), through the converter."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..analysis import ClassificationResult, DistortionReport, WaveformRecord, classify, total_distortion
from ..converter import SimResult, simulate, write_timeseries_csv
from .config import RunConfig
from .pipeline import tone_levels, write_summary


@dataclass
class SingleResult:
    levels: np.ndarray
    sim: SimResult
    level_class: ClassificationResult
    voltage: Optional[DistortionReport]
    clamps: int


def run_simulate(cfg: RunConfig, out_dir: Optional[str] = None) -> SingleResult:
    spec, sc, ac = cfg.simulate, cfg.synth, cfg.analysis
    levels, starts, mod, t = tone_levels(spec.f_o, spec.m, spec.cycles, spec.method, sc, cfg.modulation.n_levels)
    sim = simulate(levels, cfg.converter, cfg.load, sc.f_clock, starts)
    cls = classify(WaveformRecord(sc.f_clock, levels.astype(float), spec.f_o), ac.theta_dc, ac.theta_lf)
    f_eff = sc.f_clock / t.K
    vd = None
    if spec.cycles >= 16 and spec.m > 0:
        vd = total_distortion(WaveformRecord(sc.f_clock, sim.v_out, f_eff))
    clamps = mod.clamp_count if mod else 0
    res = SingleResult(levels, sim, cls, vd, clamps)
    if out_dir:
        write_timeseries_csv(sim, os.path.join(out_dir, "simulate_timeseries.csv"), 1)
        write_summary(os.path.join(out_dir, "simulate_summary.txt"), {
            "method": spec.method,
            "f_o Hz": f"{spec.f_o:.6f}",
            "m": spec.m,
            "clocks per cycle": t.K,
            "category": cls.category,
            "dc_metric": f"{cls.dc_metric:.6e}",
            "lf_ratio": f"{cls.lf_metric:.6e}",
            "voltage distortion": "" if vd is None else f"{vd.total_distortion:.6f}",
            "max voltage spread": f"{sim.spread.max():.6f}",
            "clamp engagements": clamps,
        })
    return res
