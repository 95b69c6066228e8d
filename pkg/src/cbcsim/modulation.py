"""Nearest-level modulation (NLM) and its cycle-wise zero-sum variant.

Plain NLM rounds ``sample * m * n_levels`` to the nearest integer level.  The
adaptive variant keeps a running sum of the commands inside one output cycle
and replaces the last command of the cycle with minus that sum, so every
cycle nets to zero.  If the needed correction would exceed ``n_levels`` the
last command is clamped and the uncancelled remainder is carried into the
next cycle's accumulator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .fixedpoint import FixedValue, QFormat, Tie, quantize, round_shift


@dataclass(frozen=True)
class ModulationParams:
    m: float = 1.0
    n_levels: int = 7
    gain_frac_bits: int = 14

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise ValueError("modulation factor m must be in [0, 1]")
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")

    @property
    def gain(self) -> FixedValue:
        """``m * n_levels`` held in fixed point."""
        fmt = QFormat(40, self.gain_frac_bits)
        return quantize(self.m * self.n_levels, fmt)


def nlm(sample: FixedValue, p: ModulationParams, tie: Tie = "away") -> int:
    g = p.gain
    level = round_shift(sample.raw * g.raw, sample.fmt.frac_bits + g.fmt.frac_bits, tie)
    return max(-p.n_levels, min(p.n_levels, level))


def nlm_array(raw: np.ndarray, frac_bits: int, p: ModulationParams, tie: Tie = "away") -> np.ndarray:
    """Vectorized :func:`nlm` over raw samples with ``frac_bits`` fraction bits."""
    g = p.gain
    prod = np.asarray(raw, dtype=np.int64) * np.int64(g.raw)
    level = round_shift(prod, frac_bits + g.fmt.frac_bits, tie)
    return np.clip(level, -p.n_levels, p.n_levels)


@dataclass(frozen=True)
class AdaptiveCycle:
    levels: np.ndarray
    clamped: bool
    residual: int  # carried into the next cycle (0 unless clamped)

    @cached_property
    def total(self) -> int:
        return int(self.levels.sum())


def adaptive_correct(levels: np.ndarray, n_levels: int, carry: int = 0) -> AdaptiveCycle:
    """Replace the last plain command of a cycle with the zero-sum correction."""
    levels = np.asarray(levels)
    if len(levels) < 2:
        raise ValueError("an output cycle needs at least two clocks")
    running = carry + int(levels[:-1].sum())
    last = -running
    clamped = abs(last) > n_levels
    if clamped:
        last = n_levels if last > 0 else -n_levels
    out = levels.copy()
    out[-1] = last
    return AdaptiveCycle(out, clamped, running + last)


def nlm_adaptive_cycle(samples, p: ModulationParams, carry: int = 0, tie: Tie = "away") -> AdaptiveCycle:
    """Adaptive NLM over one cycle of :class:`FixedValue` samples."""
    samples = list(samples)
    fmt = samples[0].fmt
    raw = np.array([s.raw for s in samples], dtype=np.int64)
    return adaptive_correct(nlm_array(raw, fmt.frac_bits, p, tie), p.n_levels, carry)


@dataclass
class CycleAccumulator:
    """Clock-by-clock form of the adaptive NLM, as a controller would run it."""

    K: int
    n_levels: int = 7
    running_sum: int = 0
    k: int = 0
    clamp_count: int = 0

    def push(self, plain_level: int) -> int:
        if self.k < self.K - 1:
            self.running_sum += plain_level
            self.k += 1
            return plain_level
        out = max(-self.n_levels, min(self.n_levels, -self.running_sum))
        if out != -self.running_sum:
            self.clamp_count += 1
        self.running_sum += out  # residual seeds the next cycle
        self.k = 0
        return out


@dataclass
class AdaptiveNLM:
    """Cycle-at-a-time adaptive modulator with carry between cycles.

    Consecutive calls with the very same sample array and the same carry reuse the
    cached result, which makes periodic streams cheap.
    """

    p: ModulationParams
    tie: str = "away"
    carry: int = 0
    clamp_count: int = 0
    cycles: int = 0
    nonzero_cycles: int = 0
    _last_in: Optional[np.ndarray] = field(default=None, repr=False)
    _last_out: Optional[AdaptiveCycle] = field(default=None, repr=False)
    _last_carry: int = field(default=0, repr=False)

    def process(self, raw: np.ndarray, frac_bits: int) -> AdaptiveCycle:
        if raw is self._last_in and self.carry == self._last_carry:
            res = self._last_out
        else:
            plain = nlm_array(raw, frac_bits, self.p, self.tie)
            res = adaptive_correct(plain, self.p.n_levels, self.carry)
            self._last_in, self._last_out, self._last_carry = raw, res, self.carry
        self.carry = res.residual
        self.cycles += 1
        self.clamp_count += res.clamped
        if res.total != 0:
            self.nonzero_cycles += 1
        return res
