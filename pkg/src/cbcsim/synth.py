"""Look-up-table sine synthesis at the controller clock.

Three ways of choosing the start address ``A0`` of each output cycle:

* ``conventional``: every cycle starts at 0.
* ``inherited``: a cycle continues from where the previous one stopped,
  ``A0(n) = A_last(n-1) + dA - L`` (mod L).  The first cycle starts at 0.
* ``improved``: every cycle starts at ``L/2 - (K-1)/2 * dA`` so the visited
  addresses are mirror-symmetric about ``L/2`` and the cycle sums to zero.

Addresses are fixed point.  ``dA`` carries ``frac_bits`` fractional bits; the
address register carries one extra guard bit so the improved start address
``(L - (K-1) dA) / 2`` is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal, Optional

import numpy as np

from .fixedpoint import DEFAULT_FORMAT, FixedValue, QFormat, Tie, quantize_array, round_shift

Method = Literal["conventional", "inherited", "improved"]
METHODS = ("conventional", "inherited", "improved")
IndexMode = Literal["round", "truncate"]


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown LUT method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True)
class LutTable:
    """Quantized sine table; ``samples`` holds raw integers in ``fmt``."""

    samples: np.ndarray
    fmt: QFormat

    @property
    def L(self) -> int:
        return len(self.samples)

    @property
    def values(self) -> np.ndarray:
        return self.samples * self.fmt.step

    def __getitem__(self, i: int) -> FixedValue:
        return FixedValue(int(self.samples[i]), self.fmt)


def build_sine_table(L: int, fmt: QFormat = DEFAULT_FORMAT, tie: Tie = "away") -> LutTable:
    """Table of ``quantize(sin(2 pi i / L))``.

    Only the first quarter wave is evaluated; the rest is mirrored so the odd
    and half-wave symmetries hold bit-exactly regardless of libm rounding.
    """
    if L < 4 or L % 2:
        raise ValueError("table length must be even and >= 4")
    i = np.arange(L)
    h = L // 2
    j = np.minimum(i % h, h - i % h)  # distance to nearest zero crossing
    raw, _ = quantize_array(np.sin(2 * np.pi * j / L), fmt, tie)
    raw = np.where(i >= h, -raw, raw)
    return LutTable(raw.astype(np.int64), fmt)


@dataclass(frozen=True)
class SynthParams:
    f_o: float
    f_clock: float = 100e6

    def __post_init__(self):
        if not self.f_clock > 0:
            raise ValueError("f_clock must be positive")
        if not 0 < self.f_o <= self.f_clock / 2:
            raise ValueError(f"f_o={self.f_o} outside (0, f_clock/2]")


def address_format(L: int, frac_bits: int) -> QFormat:
    """Unsigned format wide enough for addresses in [0, L)."""
    return QFormat(int(L - 1).bit_length() + frac_bits, frac_bits, signed=False)


@dataclass(frozen=True)
class CycleTiming:
    """Per-clock address increment ``delta_a`` and clocks per cycle ``K``."""

    delta_a: FixedValue
    K: int
    L: int

    @property
    def frac_bits(self) -> int:
        return self.delta_a.fmt.frac_bits

    @property
    def acc_format(self) -> QFormat:
        # address register: one guard bit beyond delta_a
        return address_format(self.L, self.frac_bits + 1)

    @property
    def step_raw(self) -> int:
        """delta_a in address-register units."""
        return 2 * self.delta_a.raw

    @property
    def modulus_raw(self) -> int:
        return self.L << (self.frac_bits + 1)

    def output_frequency(self, f_clock: float) -> float:
        return f_clock / self.K


def derive_timing(p: SynthParams, L: int, frac_bits: int = DEFAULT_FORMAT.frac_bits) -> CycleTiming:
    fmt = address_format(L, frac_bits)
    # dA = L f_o / f_clock, rounded to frac_bits exactly via Fraction
    exact = Fraction(L) * Fraction(p.f_o) / Fraction(p.f_clock) * (1 << frac_bits)
    raw = int(exact + Fraction(1, 2)) if exact > 0 else 0
    raw = max(raw, 1)
    if raw > fmt.raw_max:
        raise ValueError("address increment does not fit the address format")
    delta_a = FixedValue(raw, fmt)
    # K = round(L / dA), ties up (positive quantities)
    num = L << frac_bits
    K = (2 * num + raw) // (2 * raw)
    if K < 2:
        raise ValueError("fewer than two clocks per output cycle")
    return CycleTiming(delta_a, int(K), L)


@dataclass(frozen=True)
class CycleState:
    n: int
    a0: FixedValue
    method: str


@dataclass(frozen=True)
class CycleOutput:
    samples: np.ndarray  # raw ints in the table format
    addresses: np.ndarray  # raw ints in timing.acc_format, reduced mod L
    end_address: FixedValue

    def sum_raw(self) -> int:
        return int(self.samples.sum())


def initial_address(
    method: str,
    timing: CycleTiming,
    prev_end: Optional[FixedValue] = None,
) -> FixedValue:
    _check_method(method)
    fmt = timing.acc_format
    mod = timing.modulus_raw
    if method == "conventional" or (method == "inherited" and prev_end is None):
        return FixedValue(0, fmt)
    if method == "inherited":
        if prev_end.fmt != fmt:
            raise ValueError("prev_end must be in the address-register format")
        return FixedValue((prev_end.raw + timing.step_raw - mod) % mod, fmt)
    # improved; exact because step_raw is even
    a0 = (mod - (timing.K - 1) * timing.step_raw) // 2
    return FixedValue(a0 % mod, fmt)


def address_to_index(addresses: np.ndarray, timing: CycleTiming, mode: IndexMode = "round") -> np.ndarray:
    shift = timing.frac_bits + 1
    if mode == "round":
        # ties away from zero on the signed phase [-L/2, L/2), so x and L - x
        # round to negated indices
        mod = timing.modulus_raw
        signed = np.where(addresses >= mod // 2, addresses - mod, addresses)
        idx = round_shift(signed, shift, "away")
    elif mode == "truncate":
        idx = addresses >> shift
    else:
        raise ValueError(f"unknown index mode {mode!r}")
    return idx % timing.L


def synthesize_cycle(
    state: CycleState,
    timing: CycleTiming,
    table: LutTable,
    index_mode: IndexMode = "round",
) -> CycleOutput:
    if table.L != timing.L:
        raise ValueError("table length differs from timing L")
    k = np.arange(timing.K, dtype=np.int64)
    addr = (state.a0.raw + k * timing.step_raw) % timing.modulus_raw
    samples = table.samples[address_to_index(addr, timing, index_mode)]
    return CycleOutput(samples, addr, FixedValue(int(addr[-1]), timing.acc_format))


def unwrapped_addresses(a0: FixedValue, timing: CycleTiming) -> np.ndarray:
    """Addresses of one cycle before the mod-L reduction (raw register units)."""
    return a0.raw + np.arange(timing.K, dtype=np.int64) * timing.step_raw


class LutSynthesizer:
    """Stateful stream of output cycles for one (table, timing, method)."""

    def __init__(self, table: LutTable, timing: CycleTiming, method: str = "improved",
                 index_mode: IndexMode = "round"):
        _check_method(method)
        self.table = table
        self.timing = timing
        self.method = method
        self.index_mode = index_mode
        self.n = 0
        self._prev_end: Optional[FixedValue] = None
        self._fixed: Optional[CycleOutput] = None

    def next_cycle(self) -> CycleOutput:
        if self.method != "inherited" and self._fixed is not None:
            out = self._fixed  # same A0 every cycle, so same samples
        else:
            a0 = initial_address(self.method, self.timing, self._prev_end)
            out = synthesize_cycle(CycleState(self.n, a0, self.method), self.timing,
                                   self.table, self.index_mode)
            if self.method != "inherited":
                self._fixed = out
        self._prev_end = out.end_address
        self.n += 1
        return out

    def cycles(self, count: int) -> Iterator[CycleOutput]:
        for _ in range(count):
            yield self.next_cycle()


def synthesize_block(
    method: str,
    timing: CycleTiming,
    table: LutTable,
    n_cycles: int,
    index_mode: IndexMode = "round",
) -> np.ndarray:
    """``(n_cycles, K)`` raw samples; vectorized form of :class:`LutSynthesizer`.

    The inherited chain is closed-form: ``A0(n) = n K dA mod L``.
    """
    _check_method(method)
    mod = timing.modulus_raw
    step = timing.step_raw
    if method == "inherited":
        a0 = (np.arange(n_cycles, dtype=np.int64) * ((timing.K * step) % mod)) % mod
    else:
        a0 = np.full(n_cycles, initial_address(method, timing).raw, dtype=np.int64)
    addr = (a0[:, None] + np.arange(timing.K, dtype=np.int64)[None, :] * step) % mod
    return table.samples[address_to_index(addr, timing, index_mode)]


def predict_lf_oscillation(timing: CycleTiming) -> Optional[Fraction]:
    """``dA / (L - K dA)``, or ``None`` when the division is exact.

    The value is the oscillation period measured in output cycles (its sign
    only says whether cycles run long or short).
    """
    da = Fraction(timing.delta_a.raw, 1 << timing.frac_bits)
    den = timing.L - timing.K * da
    if den == 0:
        return None
    return da / den


def lf_frequency_hz(timing: CycleTiming, f_clock: float) -> Optional[float]:
    """Predicted oscillation frequency in Hz: ``f_o_eff / |dA / (L - K dA)|``.

    Equivalent to ``|f_clock - K f_o_eff|`` with ``f_o_eff = dA f_clock / L``.
    """
    r = predict_lf_oscillation(timing)
    if r is None:
        return None
    da = Fraction(timing.delta_a.raw, 1 << timing.frac_bits)
    f_eff = da * Fraction(f_clock) / timing.L
    return float(f_eff / abs(r))
