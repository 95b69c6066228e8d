"""Frequency x modulation-factor sweep producing classification maps."""
from __future__ import annotations

import os
import time
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..analysis import CATEGORIES, WaveformRecord, classify
from ..modulation import AdaptiveNLM, ModulationParams, nlm_array
from ..synth import synthesize_block
from .config import RunConfig, SweepSpec
from .pipeline import SWEEP_METHODS, fmt_opt, table_for, timing_for, write_summary


@dataclass(frozen=True)
class SweepCell:
    method: str
    f: float
    m: float
    category: str
    dc_metric: float
    lf_ratio: float
    lf_peak_hz: Optional[float]
    low_confidence: bool
    cycles: int  # cycles modulated (adaptive only; else 0)
    nonzero_cycles: int
    clamps: int


def analysis_cycles(K: int, spec: SweepSpec) -> int:
    """Cycles in the classified record: ``analysis_cycles`` capped by sample budget."""
    by_budget = spec.analysis_max_samples // K
    return int(max(spec.analysis_min_cycles, min(spec.analysis_cycles, by_budget)))


def frequency_cells(method: str, f: float, m_values: Iterable[float], cfg: RunConfig) -> list:
    """All cells of one frequency row; each cell depends only on (method, f, m)."""
    if method not in SWEEP_METHODS:
        raise ValueError(f"unknown sweep method {method!r}")
    sc, spec, ac = cfg.synth, cfg.sweep, cfg.analysis
    n_levels = cfg.modulation.n_levels
    t = timing_for(f, sc)
    frac = sc.fmt.frac_bits
    n_an = analysis_cycles(t.K, spec)
    table = table_for(sc)
    if method == "improved_adaptive":
        block = synthesize_block("improved", t, table, 1, sc.index_mode)[0]
    else:
        block = synthesize_block(method, t, table, n_an, sc.index_mode).ravel()
    out = []
    for m in m_values:
        p = ModulationParams(float(m), n_levels, frac)
        cycles = nonzero = clamps = 0
        if method == "improved_adaptive":
            mod = AdaptiveNLM(p, sc.tie)
            outs = [mod.process(block, frac) for _ in range(max(spec.n_cycles, n_an))]
            levels = np.concatenate([o.levels for o in outs[:n_an]])
            cycles, nonzero, clamps = mod.cycles, mod.nonzero_cycles, mod.clamp_count
        else:
            levels = nlm_array(block, frac, p, sc.tie)
        res = classify(WaveformRecord(sc.f_clock, levels.astype(np.float64), f), ac.theta_dc, ac.theta_lf)
        out.append(SweepCell(method, float(f), float(m), res.category, res.dc_metric, res.lf_metric,
                             res.lf_peak_frequency, res.low_confidence, cycles, nonzero, clamps))
    return out


def sweep_cell(method: str, f: float, m: float, cfg: RunConfig) -> SweepCell:
    return frequency_cells(method, f, [m], cfg)[0]


MAP_HEADER = "f_Hz,m,category,dc_metric,lf_ratio,lf_peak_Hz\n"


def _row(c: SweepCell) -> str:
    return f"{c.f:.6f},{c.m:.2f},{c.category},{c.dc_metric:.6e},{c.lf_ratio:.6e},{fmt_opt(c.lf_peak_hz)}\n"


@dataclass
class SweepResult:
    cells: dict  # method -> list[SweepCell]
    seconds: dict

    def counts(self, method: str) -> Counter:
        return Counter(c.category for c in self.cells[method])

    def fraction(self, method: str, category: str) -> float:
        cells = self.cells[method]
        return sum(c.category == category for c in cells) / len(cells)


def run_sweep(cfg: RunConfig, out_dir: Optional[str] = None, methods: Optional[list] = None,
              f_values=None, m_values=None, progress=None) -> SweepResult:
    """Run the grid; if ``out_dir`` is given, rows are streamed to ``map_<method>.csv``."""
    spec = cfg.sweep
    methods = methods or spec.method_list()
    f_values = spec.f_values() if f_values is None else np.asarray(f_values, dtype=float)
    m_values = spec.m_values() if m_values is None else np.asarray(m_values, dtype=float)
    if f_values.max() > cfg.synth.f_clock / 2:
        raise ValueError("sweep frequency above f_clock/2")
    cells, seconds = {}, {}
    for method in methods:
        t0 = time.perf_counter()
        fh = open(os.path.join(out_dir, f"map_{method}.csv"), "w") if out_dir else None
        rows = []
        try:
            if fh:
                fh.write(MAP_HEADER)
            for f in f_values:
                row = frequency_cells(method, f, m_values, cfg)
                rows.extend(row)
                if fh:
                    fh.writelines(_row(c) for c in row)
                if progress:
                    progress(method, f)
        finally:
            if fh:
                fh.close()
        cells[method] = rows
        seconds[method] = time.perf_counter() - t0
    res = SweepResult(cells, seconds)
    if out_dir:
        summary = {}
        for method in methods:
            cnt = res.counts(method)
            summary[f"{method} cells"] = len(res.cells[method])
            for cat in CATEGORIES:
                summary[f"{method} {cat}"] = cnt.get(cat, 0)
            ad = res.cells[method]
            summary[f"{method} clamp engagements"] = sum(c.clamps for c in ad)
            summary[f"{method} nonzero-sum adaptive cycles"] = sum(c.nonzero_cycles for c in ad)
        summary["theta_dc"] = cfg.analysis.theta_dc
        summary["theta_lf"] = cfg.analysis.theta_lf
        write_summary(os.path.join(out_dir, "sweep_summary.txt"), summary)
    return res
