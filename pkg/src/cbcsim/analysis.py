"""Waveform metrics: DC bias, sub-fundamental oscillation, THD+N, spectrograms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy import signal

IDEAL, DCBIAS, LFOSC = "Ideal", "DCBias", "LFOscillation"
CATEGORIES = (IDEAL, DCBIAS, LFOSC)

# Calibrated on level streams from the desk grid; see README.
THETA_DC = 1e-3
THETA_LF = 1e-5


@dataclass(frozen=True)
class WaveformRecord:
    sample_rate: float
    samples: np.ndarray
    f_o: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if len(self.samples) == 0:
            raise ValueError("empty record")

    @property
    def n_cycles(self) -> float:
        return len(self.samples) * self.f_o / self.sample_rate

    def scaled(self, c: float) -> "WaveformRecord":
        return WaveformRecord(self.sample_rate, np.asarray(self.samples) * c, self.f_o)


@dataclass(frozen=True)
class LFResult:
    ratio: float
    peak_hz: Optional[float]
    low_confidence: bool


@dataclass(frozen=True)
class ClassificationResult:
    category: str
    dc_metric: float
    lf_metric: float
    lf_peak_frequency: Optional[float]
    theta_dc: float
    theta_lf: float
    low_confidence: bool = False


@dataclass(frozen=True)
class DistortionReport:
    fundamental_rms: float
    residual_rms: float
    total_distortion: float
    amplitude: float
    phase: float


@dataclass(frozen=True)
class SpectrogramMatrix:
    times: np.ndarray
    frequencies: np.ndarray
    magnitudes: np.ndarray  # dB, shape (len(frequencies), len(times))

    def __post_init__(self):
        if self.magnitudes.shape != (len(self.frequencies), len(self.times)):
            raise ValueError("spectrogram dimensions disagree")


def dc_bias_metric(rec: WaveformRecord, full_scale: Optional[float] = None) -> float:
    """Mean normalized by the peak amplitude (RMS * sqrt 2 unless given).

    The mean is Hann-weighted, so a slow oscillation cut off mid-period by the
    record edges does not leak into it.  For a periodic record holding two or
    more whole periods it equals the plain mean.
    """
    x = np.asarray(rec.samples, dtype=np.float64)
    w = signal.windows.hann(len(x), sym=False) if len(x) > 1 else np.ones(1)
    mean = float(w @ x / w.sum())
    scale = full_scale if full_scale is not None else np.sqrt(np.mean(x * x)) * np.sqrt(2.0)
    if scale == 0:
        return 0.0
    return float(mean / scale)


def _hann_power(x: np.ndarray):
    n = len(x)
    w = signal.windows.hann(n, sym=False)
    nfft = sfft.next_fast_len(n, real=True)
    spec = sfft.rfft(x * w, n=nfft)
    return np.abs(spec) ** 2, nfft


def lf_oscillation_metric(rec: WaveformRecord) -> LFResult:
    """Hann-windowed power below ``f_o/2`` over the fundamental's power.

    The lowest two native bins are dropped (they hold the window's DC lobe);
    the fundamental is the main lobe around the strongest bin in
    ``[f_o/2, 3 f_o/2]``.
    """
    x = np.asarray(rec.samples, dtype=np.float64)
    n = len(x)
    p, nfft = _hann_power(x - x.mean())
    df = rec.sample_rate / nfft
    native = rec.sample_rate / n
    f = np.arange(len(p)) * df
    low_confidence = rec.f_o / 2 < 4 * native
    fund_band = (f >= rec.f_o / 2) & (f <= 1.5 * rec.f_o)
    if not fund_band.any():
        return LFResult(0.0, None, True)
    idx = np.flatnonzero(fund_band)
    pk = idx[np.argmax(p[idx])]
    lobe = np.abs(f - f[pk]) <= 2 * native
    fund = p[lobe].sum()
    lf_band = (f >= 2 * native) & (f < rec.f_o / 2)
    if fund == 0 or not lf_band.any():
        return LFResult(0.0, None, True)
    lf = p[lf_band]
    ratio = float(lf.sum() / fund)
    # below this the band holds only rounding noise and the peak is meaningless
    peak = float(f[lf_band][np.argmax(lf)]) if ratio > 1e-15 else None
    return LFResult(ratio, peak, bool(low_confidence))


def classify(rec: WaveformRecord, theta_dc: float = THETA_DC, theta_lf: float = THETA_LF) -> ClassificationResult:
    dc = dc_bias_metric(rec)
    lf = lf_oscillation_metric(rec)
    if abs(dc) > theta_dc:
        cat = DCBIAS
    elif lf.ratio > theta_lf:
        cat = LFOSC
    else:
        cat = IDEAL
    return ClassificationResult(cat, dc, lf.ratio, lf.peak_hz, theta_dc, theta_lf, lf.low_confidence)


def total_distortion(rec: WaveformRecord, phase: Optional[np.ndarray] = None,
                     min_cycles: float = 16) -> DistortionReport:
    """THD+N: RMS of everything except the fundamental over the fundamental RMS.

    The fundamental is the least-squares fit of ``a sin(phase) + b cos(phase)``;
    ``phase`` defaults to ``2 pi f_o t``.  For a whole number of cycles this is
    single-bin correlation.  Pass the intended phase for swept signals.
    """
    x = np.asarray(rec.samples, dtype=np.float64)
    if phase is None:
        phase = 2 * np.pi * rec.f_o * np.arange(len(x)) / rec.sample_rate
    cycles = abs(phase[-1] - phase[0]) / (2 * np.pi)
    if cycles < min_cycles:
        raise ValueError(f"record spans {cycles:.2f} cycles; at least {min_cycles} needed to resolve f_o")
    basis = np.stack([np.sin(phase), np.cos(phase)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    fundamental = basis @ coef
    resid = x - fundamental
    f_rms = float(np.sqrt(np.mean(fundamental ** 2)))
    r_rms = float(np.sqrt(np.mean(resid ** 2)))
    td = r_rms / f_rms if f_rms > 0 else float("inf")
    return DistortionReport(f_rms, r_rms, td, float(np.hypot(*coef)), float(np.arctan2(coef[1], coef[0])))


def power_spectrum(rec: WaveformRecord):
    """One-sided power per bin (rectangular window); sums to mean square."""
    x = np.asarray(rec.samples, dtype=np.float64)
    n = len(x)
    X = np.fft.rfft(x)
    p = np.abs(X) ** 2 / n ** 2
    if n % 2 == 0:
        p[1:-1] *= 2
    else:
        p[1:] *= 2
    return np.fft.rfftfreq(n, 1 / rec.sample_rate), p


def interval_fft(rec: WaveformRecord, start: float, end: float):
    """Amplitude spectrum (rectangular window) of ``[start, end)`` seconds."""
    i0 = int(round(start * rec.sample_rate))
    i1 = int(round(end * rec.sample_rate))
    seg = np.asarray(rec.samples[i0:i1], dtype=np.float64)
    if len(seg) < 2:
        raise ValueError("interval too short")
    mag = np.abs(np.fft.rfft(seg)) * 2 / len(seg)
    mag[0] /= 2
    return np.fft.rfftfreq(len(seg), 1 / rec.sample_rate), mag


def spectrogram(rec: WaveformRecord, window_len: int = 1024, hop: Optional[int] = None,
                floor_db: float = -200.0) -> SpectrogramMatrix:
    """Hann-windowed magnitude STFT in dB (amplitude-calibrated for tones)."""
    x = np.asarray(rec.samples, dtype=np.float64)
    if window_len > len(x):
        raise ValueError("window longer than record")
    hop = hop or window_len // 2
    f, t, mag = signal.spectrogram(x, fs=rec.sample_rate, window="hann", nperseg=window_len,
                                   noverlap=window_len - hop, detrend=False,
                                   scaling="spectrum", mode="magnitude")
    mag = mag * 2  # one-sided tone amplitude
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag)
    return SpectrogramMatrix(t, f, np.maximum(db, floor_db))


def write_spectrogram_csv(sg: SpectrogramMatrix, path, f_max: Optional[float] = None) -> None:
    """Rows are frequencies, columns are frame times; first row/column are axes."""
    keep = sg.frequencies <= f_max if f_max is not None else slice(None)
    freqs = sg.frequencies[keep]
    mags = sg.magnitudes[keep]
    with open(path, "w") as fh:
        fh.write("frequency_Hz," + ",".join(f"{t:.9e}" for t in sg.times) + "\n")
        for f, row in zip(freqs, mags):
            fh.write(f"{f:.6e}," + ",".join(f"{v:.3f}" for v in row) + "\n")


def write_pgm(sg: SpectrogramMatrix, path, f_max: Optional[float] = None, dynamic_range: float = 80.0) -> None:
    """8-bit binary graymap, low frequency at the bottom, time left to right."""
    keep = sg.frequencies <= f_max if f_max is not None else slice(None)
    m = sg.magnitudes[keep][::-1]
    top = m.max() if m.size else 0.0
    img = np.clip((m - (top - dynamic_range)) / dynamic_range, 0, 1)
    img = np.round(img * 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
