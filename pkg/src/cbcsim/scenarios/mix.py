"""Multichannel mixture: per-channel improved-LUT tones summed, then modulated."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..analysis import WaveformRecord, interval_fft, spectrogram, write_pgm, write_spectrogram_csv
from ..converter import SimResult, simulate, write_timeseries_csv
from .config import MixSpec, RunConfig
from .pipeline import adaptive_blocks, improved_cycle, reference_levels, table_for, write_summary


@dataclass(frozen=True)
class Channel:
    frequency: float
    amplitude: float  # normalized; multiplied by the plan scale to get levels
    start: float
    end: float


# 10 kHz fundamental plus the six timed channels
DEFAULT_PLAN = (
    Channel(10e3, 1, 0.0, 1000e-6),
    Channel(100e3, 2, 0.0, 200e-6),
    Channel(200e3, 4, 100e-6, 500e-6),
    Channel(400e3, 3, 400e-6, 800e-6),
    Channel(1e6, 4, 600e-6, 700e-6),
    Channel(3e6, 4, 700e-6, 800e-6),
    Channel(5e6, 6, 800e-6, 1000e-6),
)


def parse_plan(text: str) -> tuple:
    """``"default"`` or ``"f:amp:start:end; ..."`` with times in seconds."""
    if text.strip() == "default":
        return DEFAULT_PLAN
    chans = []
    for item in text.split(";"):
        if item.strip():
            f, a, s, e = (float(x) for x in item.split(":"))
            chans.append(Channel(f, a, s, e))
    if not chans:
        raise ValueError("empty channel plan")
    return tuple(chans)


def peak_amplitude_sum(plan, scale: float) -> float:
    """Largest instantaneous sum of scaled amplitudes over the plan."""
    edges = sorted({c.start for c in plan} | {c.end for c in plan})
    best = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        best = max(best, sum(c.amplitude for c in plan if c.start <= mid < c.end) * scale)
    return best


def check_clipping(plan, scale: float, n_levels: int) -> None:
    peak = peak_amplitude_sum(plan, scale)
    if peak > n_levels + 1e-9:
        raise ValueError(f"channel plan peaks at {peak:g} levels, above {n_levels}")


def channel_reference(ch: Channel, n_clocks: int, cfg: RunConfig, scale: float) -> np.ndarray:
    """One channel's contribution in level units, gated to whole cycles."""
    sc = cfg.synth
    ref = np.zeros(n_clocks)
    cyc = improved_cycle(ch.frequency, sc)
    K = cyc.timing.K
    k0 = int(round(ch.start * sc.f_clock))
    k1 = min(int(round(ch.end * sc.f_clock)), n_clocks)
    n = max(0, (k1 - k0) // K)
    if n:
        vals = cyc.samples * table_for(sc).fmt.step
        ref[k0:k0 + n * K] = np.tile(vals, n) * (ch.amplitude * scale)
    return ref


def mix_reference(plan, n_clocks: int, cfg: RunConfig, scale: float) -> np.ndarray:
    ref = np.zeros(n_clocks)
    for ch in plan:
        ref += channel_reference(ch, n_clocks, cfg, scale)
    return ref


@dataclass
class MixResult:
    reference: np.ndarray
    levels: np.ndarray
    sim: SimResult
    clamps: int
    ffts: dict  # instant (s) -> (freqs, magnitude)


def interval_bounds(plan, t: float):
    edges = sorted({c.start for c in plan} | {c.end for c in plan})
    for a, b in zip(edges[:-1], edges[1:]):
        if a <= t < b:
            return a, b
    raise ValueError(f"instant {t} outside the plan")


def run_mix(cfg: RunConfig, out_dir: Optional[str] = None, plan=None) -> MixResult:
    spec: MixSpec = cfg.mix
    sc, ac = cfg.synth, cfg.analysis
    plan = plan if plan is not None else parse_plan(spec.plan)
    n_levels = cfg.modulation.n_levels
    check_clipping(plan, spec.scale, n_levels)
    n_clocks = int(round(spec.duration * sc.f_clock))
    ref = mix_reference(plan, n_clocks, cfg, spec.scale)
    plain = reference_levels(ref, sc.fmt.frac_bits, sc.tie)
    block = int(round(sc.f_clock / spec.cycle_frequency))
    levels, starts, clamps = adaptive_blocks(plain, block, n_levels)
    sim = simulate(levels, cfg.converter, cfg.load, sc.f_clock, starts, record_stride=spec.timeseries_stride)
    ffts = {}
    vrec = WaveformRecord(sc.f_clock, sim.v_out, spec.cycle_frequency)
    for t in (float(x) for x in spec.fft_instants.split(",") if x.strip()):
        a, b = interval_bounds(plan, t)
        ffts[t] = interval_fft(vrec, a, b)
    res = MixResult(ref, levels, sim, clamps, ffts)
    if out_dir:
        write_timeseries_csv(sim, os.path.join(out_dir, "mix_timeseries.csv"), spec.timeseries_stride)
        sg = spectrogram(WaveformRecord(sc.f_clock, sim.i_load, spec.cycle_frequency),
                         ac.spectrogram_window, ac.spectrogram_hop)
        write_spectrogram_csv(sg, os.path.join(out_dir, "mix_spectrogram.csv"), ac.spectrogram_fmax)
        write_pgm(sg, os.path.join(out_dir, "mix_spectrogram.pgm"), ac.spectrogram_fmax)
        for t, (f, mag) in ffts.items():
            keep = f <= ac.spectrogram_fmax
            with open(os.path.join(out_dir, f"mix_fft_{t * 1e6:.0f}us.csv"), "w") as fh:
                fh.write("frequency_Hz,magnitude\n")
                fh.writelines(f"{a:.6e},{b:.6e}\n" for a, b in zip(f[keep], mag[keep]))
        write_summary(os.path.join(out_dir, "mix_summary.txt"), {
            "channels": len(plan),
            "peak amplitude sum (levels)": f"{peak_amplitude_sum(plan, spec.scale):.6f}",
            "max voltage spread": f"{sim.spread.max():.6f}",
            "peak voltage V": f"{np.abs(sim.v_out).max():.6f}",
            "clamp engagements": clamps,
            "fft instants": ",".join(f"{t * 1e6:.0f}us" for t in ffts),
        })
    return res
