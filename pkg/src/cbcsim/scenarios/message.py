"""Bitmap carried in the load-current spectrogram, one channel per row.

Two calibration columns precede the message: even rows on, then odd rows on.
Every channel is thus seen once on and once off, and its decision threshold
is the midpoint of those two magnitudes.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..analysis import SpectrogramMatrix, WaveformRecord, spectrogram, write_pgm, write_spectrogram_csv
from ..converter import SimResult, simulate, write_timeseries_csv
from .config import MessageSpec, RunConfig
from .pipeline import adaptive_blocks, improved_cycle, reference_levels, table_for, write_summary


def read_bitmap(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if set(line) - {"0", "1"}:
                raise ValueError(f"bitmap rows may only hold '0' and '1': {line!r}")
            rows.append([int(ch) for ch in line])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("bitmap must be a non-empty rectangle")
    return np.array(rows, dtype=np.uint8)


def write_bitmap(bits: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for row in bits:
            fh.write("".join(str(int(b)) for b in row) + "\n")


def random_bitmap(rows: int, cols: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, size=(rows, cols), dtype=np.uint8)


def arecibo_bitmap() -> np.ndarray:
    """A 23 x 73 picture in the spirit of the 1974 broadcast (drawn, not copied).

    Left to right: binary counting 1..10, a double helix, a stick figure and
    a dish with its beam.
    """
    img = np.zeros((23, 73), dtype=np.uint8)
    for n in range(1, 11):  # numbers, 4 bits each, one column apart
        col = 1 + 2 * (n - 1)
        for b in range(4):
            img[1 + 2 * b, col] = (n >> (3 - b)) & 1
        img[10, col] = 1  # marker row under each number
    x = np.arange(22, 40)  # helix
    for phase in (0.0, np.pi):
        y = np.round(11 + 7 * np.sin(2 * np.pi * (x - 22) / 12 + phase)).astype(int)
        img[y, x] = 1
    for c in range(24, 40, 3):
        img[4:19, c] |= (np.arange(4, 19) % 2).astype(np.uint8)
    # figure
    img[2:5, 45:48] = 1
    img[3, 46] = 0
    img[5:13, 46] = 1
    img[7, 43:50] = 1
    for k in range(4):
        img[13 + k, 45 - k] = 1
        img[13 + k, 47 + k] = 1
    # dish: parabola opening upward, beam above
    for c in range(55, 72):
        r = int(round(20 - ((c - 63) / 8.0) ** 2 * 6))
        img[r, c] = 1
    img[3:14, 63] = 1
    img[14:20, 63] = 1
    img[21, 55:72] = 1
    for r in range(1, 10, 2):
        img[r, 60:67:2] = 1
    return img


def calibration_columns(rows: int) -> np.ndarray:
    even = (np.arange(rows) % 2 == 0).astype(np.uint8)
    return np.stack([even, 1 - even], axis=1)


def check_resolution(spec: MessageSpec, f_clock: float) -> None:
    # Hann main lobe is +-2 bins; require it inside half the channel spacing
    need = int(np.ceil(4 * f_clock / spec.f_step))
    if spec.window_len < need:
        raise ValueError(f"channel spacing {spec.f_step:g} Hz needs window_len >= {need}")
    if spec.window_len > spec.column_duration * f_clock:
        raise ValueError("spectrogram window longer than one column")


def column_amplitudes(bits: np.ndarray, spec: MessageSpec, n_levels: int, n_calibration: int = 2) -> np.ndarray:
    """Per-tone amplitude of each column, in levels.

    A message column spreads the full range over its active channels.  The
    calibration columns use the weakest amplitude any column can get (all
    rows on), so thresholds taken from them sit below every real "on".
    """
    rows = bits.shape[0]
    counts = np.maximum(bits.sum(axis=0), 1)
    amps = spec.m * n_levels / counts
    amps[:n_calibration] = spec.m * n_levels / rows
    return amps


def message_reference(bits: np.ndarray, spec: MessageSpec, cfg: RunConfig, amps: np.ndarray) -> np.ndarray:
    sc = cfg.synth
    rows, cols = bits.shape
    per_col = int(round(spec.column_duration * sc.f_clock))
    step = table_for(sc).fmt.step
    ref = np.zeros(per_col * cols)
    for r in range(rows):
        cyc = improved_cycle(spec.f_first + r * spec.f_step, sc)
        K = cyc.timing.K
        n = per_col // K
        tone = np.tile(cyc.samples * step, n)
        for c in np.flatnonzero(bits[r]):
            k0 = c * per_col
            ref[k0:k0 + n * K] += tone * amps[c]
    return ref


def decode(sg: SpectrogramMatrix, rows: int, cols: int, spec: MessageSpec, f_clock: float):
    """Per (row, column) mean linear magnitude at the channel bin, then threshold.

    Returns (bits of all columns incl. calibration, energies, thresholds).
    """
    mag = 10 ** (sg.magnitudes / 20)
    half = spec.window_len / 2 / f_clock
    f_ch = spec.f_first + np.arange(rows) * spec.f_step
    bins = np.rint(f_ch / (sg.frequencies[1] - sg.frequencies[0])).astype(int)
    energy = np.zeros((rows, cols))
    for c in range(cols):
        a, b = c * spec.column_duration, (c + 1) * spec.column_duration
        frames = (sg.times - half >= a - 1e-12) & (sg.times + half <= b + 1e-12)
        if not frames.any():
            raise ValueError("no spectrogram frame fits inside a column; shorten the window")
        sub = mag[:, frames]
        for r in range(rows):
            energy[r, c] = sub[bins[r] - 1:bins[r] + 2].max(axis=0).mean()
    cal = calibration_columns(rows)
    on = np.where(cal[:, 0] == 1, energy[:, 0], energy[:, 1])
    off = np.where(cal[:, 0] == 1, energy[:, 1], energy[:, 0])
    thresholds = 0.5 * (on + off)
    return (energy > thresholds[:, None]).astype(np.uint8), energy, thresholds


@dataclass
class MessageResult:
    truth: np.ndarray
    decoded: np.ndarray
    sim: SimResult
    clamps: int

    @property
    def accuracy(self) -> float:
        return float((self.truth == self.decoded).mean())


def resolve_bitmap(spec: MessageSpec, seed: int) -> np.ndarray:
    if spec.bitmap == "arecibo":
        return arecibo_bitmap()
    if spec.bitmap == "random":
        return random_bitmap(spec.rows, spec.columns, seed)
    return read_bitmap(spec.bitmap)


def run_message(cfg: RunConfig, out_dir: Optional[str] = None, bits: Optional[np.ndarray] = None) -> MessageResult:
    spec, sc = cfg.message, cfg.synth
    bits = resolve_bitmap(spec, cfg.seed) if bits is None else np.asarray(bits, dtype=np.uint8)
    check_resolution(spec, sc.f_clock)
    rows = bits.shape[0]
    full = np.concatenate([calibration_columns(rows), bits], axis=1)
    ref = message_reference(full, spec, cfg, column_amplitudes(full, spec, cfg.modulation.n_levels))
    plain = reference_levels(ref, sc.fmt.frac_bits, sc.tie)
    # every channel restarts its phase at a column edge, so the column is the common cycle
    block = int(round(spec.column_duration * sc.f_clock))
    levels, starts, clamps = adaptive_blocks(plain, block, cfg.modulation.n_levels)
    sim = simulate(levels, cfg.converter, cfg.load, sc.f_clock, starts, record_stride=spec.timeseries_stride)
    sg = spectrogram(WaveformRecord(sc.f_clock, sim.i_load, spec.f_first), spec.window_len, spec.hop)
    decoded_all, _, _ = decode(sg, rows, full.shape[1], spec, sc.f_clock)
    res = MessageResult(bits, decoded_all[:, 2:], sim, clamps)
    if out_dir:
        fmax = spec.f_first + (rows + 1) * spec.f_step
        write_timeseries_csv(sim, os.path.join(out_dir, "message_timeseries.csv"), spec.timeseries_stride)
        write_spectrogram_csv(sg, os.path.join(out_dir, "message_spectrogram.csv"), fmax)
        write_pgm(sg, os.path.join(out_dir, "message_spectrogram.pgm"), fmax, dynamic_range=60)
        write_bitmap(res.decoded, os.path.join(out_dir, "message_decoded.txt"))
        write_bitmap(bits, os.path.join(out_dir, "message_truth.txt"))
        write_summary(os.path.join(out_dir, "message_summary.txt"), {
            "rows x columns": f"{bits.shape[0]} x {bits.shape[1]}",
            "pixel accuracy": f"{res.accuracy:.6f}",
            "wrong pixels": int((res.truth != res.decoded).sum()),
            "max voltage spread": f"{sim.spread.max():.6f}",
            "clamp engagements": clamps,
        })
    return res
