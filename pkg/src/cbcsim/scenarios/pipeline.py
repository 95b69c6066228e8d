"""Shared plumbing: table cache, tone cycles, level streams, summary files."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ..fixedpoint import QFormat, quantize_array, round_shift
from ..modulation import AdaptiveNLM, ModulationParams, adaptive_correct, nlm_array
from ..synth import (CycleTiming, LutTable, SynthParams, build_sine_table, derive_timing,
                     initial_address, synthesize_block)
from .config import SynthConfig

SWEEP_METHODS = ("conventional", "inherited", "improved", "improved_adaptive")


@lru_cache(maxsize=8)
def _table(L: int, qformat: str, tie: str) -> LutTable:
    return build_sine_table(L, QFormat.parse(qformat), tie)


def table_for(sc: SynthConfig) -> LutTable:
    return _table(sc.table_length, sc.qformat, sc.tie)


def timing_for(f: float, sc: SynthConfig) -> CycleTiming:
    return derive_timing(SynthParams(f, sc.f_clock), sc.table_length, sc.fmt.frac_bits)


@dataclass(frozen=True)
class ToneCycle:
    """One improved-LUT output cycle: raw samples and the intended phase."""

    timing: CycleTiming
    samples: np.ndarray
    phase: np.ndarray  # radians within the cycle, from the exact addresses


def improved_cycle(f: float, sc: SynthConfig) -> ToneCycle:
    return _improved_cycle(float(f), sc)


@lru_cache(maxsize=4096)
def _improved_cycle(f: float, sc: SynthConfig) -> ToneCycle:
    t = timing_for(f, sc)
    samples = synthesize_block("improved", t, table_for(sc), 1, sc.index_mode)[0]
    a0 = initial_address("improved", t).raw
    addr = a0 + np.arange(t.K, dtype=np.int64) * t.step_raw
    phase = 2 * np.pi * addr / t.modulus_raw
    return ToneCycle(t, samples, phase)


def reference_levels(ref: np.ndarray, frac_bits: int, tie: str) -> np.ndarray:
    """Round a real-valued reference (in level units) through fixed point."""
    raw, sat = quantize_array(ref, QFormat(40, frac_bits), tie)
    if sat.any():
        raise ValueError("reference saturates the fixed-point format")
    return round_shift(raw, frac_bits, tie)


def adaptive_blocks(levels: np.ndarray, block: int, n_levels: int):
    """Zero-sum correction on consecutive blocks of ``block`` clocks.

    Returns corrected levels, cycle-start flags and the clamp count.
    """
    out = np.asarray(levels, dtype=np.int64).copy()
    starts = np.zeros(len(out), dtype=bool)
    carry = 0
    clamps = 0
    for s in range(0, len(out), block):
        seg = out[s:s + block]
        starts[s] = True
        if len(seg) < 2:
            continue
        r = adaptive_correct(seg, n_levels, carry)
        out[s:s + block] = r.levels
        carry = r.residual
        clamps += r.clamped
    return out, starts, clamps


def tone_levels(f: float, m: float, n_cycles: int, method: str, sc: SynthConfig, n_levels: int = 7):
    """Level stream of ``n_cycles`` cycles for one of the four sweep methods.

    Returns (levels, cycle-start flags, modulator or None, timing).
    """
    t = timing_for(f, sc)
    p = ModulationParams(m, n_levels, sc.fmt.frac_bits)
    frac = sc.fmt.frac_bits
    starts = np.zeros(n_cycles * t.K, dtype=bool)
    starts[::t.K] = True
    if method == "improved_adaptive":
        cyc = synthesize_block("improved", t, table_for(sc), 1, sc.index_mode)[0]
        mod = AdaptiveNLM(p, sc.tie)
        lv = np.concatenate([mod.process(cyc, frac).levels for _ in range(n_cycles)])
        return lv, starts, mod, t
    block = synthesize_block(method, t, table_for(sc), n_cycles, sc.index_mode)
    return nlm_array(block.ravel(), frac, p, sc.tie), starts, None, t


def write_summary(path, lines: dict) -> None:
    with open(path, "w") as fh:
        for k, v in lines.items():
            fh.write(f"{k}: {v}\n")


def fmt_opt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6e}"
