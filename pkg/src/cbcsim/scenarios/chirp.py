"""Exponential frequency sweep through the converter."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..analysis import WaveformRecord, spectrogram, total_distortion, write_pgm, write_spectrogram_csv
from ..converter import SimResult, simulate, write_timeseries_csv
from ..modulation import AdaptiveNLM, ModulationParams
from .config import ChirpSpec, RunConfig
from .pipeline import improved_cycle, write_summary


@dataclass
class ChirpStream:
    levels: np.ndarray
    starts: np.ndarray
    phase: np.ndarray  # continuous intended phase (rad)
    cycle_start_index: np.ndarray
    cycle_frequency: np.ndarray  # f_clock / K per cycle
    clamps: int


def chirp_stream(spec: ChirpSpec, cfg: RunConfig) -> ChirpStream:
    """Each output cycle is one improved-LUT cycle at the instantaneous frequency."""
    sc = cfg.synth
    n_clocks = int(round(spec.duration * sc.f_clock))
    mod = AdaptiveNLM(ModulationParams(spec.m, cfg.modulation.n_levels, sc.fmt.frac_bits), sc.tie)
    f_max = sc.f_clock / 2
    chunks, phases, idx, freqs = [], [], [], []
    k = 0
    n = 0
    while k < n_clocks:
        f = min(float(spec.frequency(k / sc.f_clock)), f_max)
        cyc = improved_cycle(f, sc)
        chunks.append(mod.process(cyc.samples, sc.fmt.frac_bits).levels)
        phases.append(cyc.phase + 2 * np.pi * n)
        idx.append(k)
        freqs.append(sc.f_clock / cyc.timing.K)
        k += cyc.timing.K
        n += 1
    levels = np.concatenate(chunks)
    starts = np.zeros(len(levels), dtype=bool)
    starts[idx] = True
    return ChirpStream(levels, starts, np.concatenate(phases), np.array(idx), np.array(freqs),
                       mod.clamp_count)


@dataclass
class ChirpResult:
    stream: ChirpStream
    sim: SimResult
    windows: np.ndarray  # structured rows, see WINDOW_COLUMNS
    peak_voltage: float
    nominal_peak: float

    @property
    def max_distortion(self) -> float:
        return float(self.windows["v_distortion"].max())


WINDOW_COLUMNS = ("t_start_s", "t_end_s", "f_center_Hz", "v_distortion", "i_distortion", "i_amplitude_A",
                  "max_spread")


def window_table(stream: ChirpStream, sim: SimResult, f_clock: float, window_cycles: int) -> np.ndarray:
    idx = np.append(stream.cycle_start_index, len(stream.levels))
    n_win = (len(idx) - 1) // window_cycles
    rows = np.zeros(n_win, dtype=[(c, "f8") for c in WINDOW_COLUMNS])
    for w in range(n_win):
        a = idx[w * window_cycles]
        b = idx[(w + 1) * window_cycles]
        ph = stream.phase[a:b]
        vr = total_distortion(WaveformRecord(f_clock, sim.v_out[a:b], 0.0), ph, min_cycles=window_cycles - 1)
        ir = total_distortion(WaveformRecord(f_clock, sim.i_load[a:b], 0.0), ph, min_cycles=window_cycles - 1)
        fc = stream.cycle_frequency[w * window_cycles:(w + 1) * window_cycles]
        rows[w] = (a / f_clock, b / f_clock, float(np.exp(np.log(fc).mean())), vr.total_distortion,
                   ir.total_distortion, ir.amplitude, float(sim.spread[a:b].max()))
    return rows


def run_chirp(cfg: RunConfig, out_dir: Optional[str] = None) -> ChirpResult:
    spec, sc, ac = cfg.chirp, cfg.synth, cfg.analysis
    stream = chirp_stream(spec, cfg)
    sim = simulate(stream.levels, cfg.converter, cfg.load, sc.f_clock, stream.starts,
                   record_stride=spec.timeseries_stride)
    windows = window_table(stream, sim, sc.f_clock, spec.window_cycles)
    nominal_peak = float(np.abs(stream.levels).max() * cfg.converter.nominal_voltage)
    res = ChirpResult(stream, sim, windows, float(np.abs(sim.v_out).max()), nominal_peak)
    if out_dir:
        write_timeseries_csv(sim, os.path.join(out_dir, "chirp_timeseries.csv"), spec.timeseries_stride)
        sg = spectrogram(WaveformRecord(sc.f_clock, sim.i_load, spec.f_end), ac.spectrogram_window,
                         ac.spectrogram_hop)
        write_spectrogram_csv(sg, os.path.join(out_dir, "chirp_spectrogram.csv"), ac.spectrogram_fmax)
        write_pgm(sg, os.path.join(out_dir, "chirp_spectrogram.pgm"), ac.spectrogram_fmax)
        with open(os.path.join(out_dir, "chirp_windows.csv"), "w") as fh:
            fh.write(",".join(WINDOW_COLUMNS) + "\n")
            for r in windows:
                fh.write(",".join(f"{r[c]:.6e}" for c in WINDOW_COLUMNS) + "\n")
        write_summary(os.path.join(out_dir, "chirp_summary.txt"), {
            "output cycles": len(stream.cycle_start_index),
            "windows": len(windows),
            "max voltage distortion": f"{windows['v_distortion'].max():.6f}",
            "mean voltage distortion": f"{windows['v_distortion'].mean():.6f}",
            "max current distortion": f"{windows['i_distortion'].max():.6f}",
            "mean current distortion": f"{windows['i_distortion'].mean():.6f}",
            "nominal peak voltage V": f"{nominal_peak:.3f}",
            "simulated peak voltage V": f"{res.peak_voltage:.6f}",
            "max voltage spread": f"{sim.spread.max():.6f}",
            "max charge error": f"{sim.max_charge_error:.3e}",
            "paralleling loss J": f"{sim.energy_paralleling:.6e}",
            "clamp engagements": stream.clamps,
        })
    return res
