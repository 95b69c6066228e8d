"""Signed/unsigned Q-format fixed-point values with exact integer arithmetic.

A value in ``Q(total, frac)`` is stored as an integer ``raw`` and represents
``raw / 2**frac``.  All rounding happens on integers, so results do not depend
on float evaluation order.

Tie rules (what happens to an exact .5):

``away``  half away from zero (default; symmetric under negation)
``even``  half to even
``up``    half toward +infinity (asymmetric; kept for comparison)
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Literal

import numpy as np

Tie = Literal["away", "even", "up"]
TIES = ("away", "even", "up")


def _check_tie(tie: str) -> None:
    if tie not in TIES:
        raise ValueError(f"unknown tie rule {tie!r}; expected one of {TIES}")


@dataclass(frozen=True)
class QFormat:
    total_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if self.total_bits < 1 or self.total_bits > 64:
            raise ValueError("total_bits must be in [1, 64]")
        if self.frac_bits < 1 or self.frac_bits >= self.total_bits:
            raise ValueError("frac_bits must be in [1, total_bits)")

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1)) if self.signed else 0

    @property
    def raw_max(self) -> int:
        bits = self.total_bits - 1 if self.signed else self.total_bits
        return (1 << bits) - 1

    @property
    def min_value(self) -> float:
        return self.raw_min * self.step

    @property
    def max_value(self) -> float:
        return self.raw_max * self.step

    @classmethod
    def parse(cls, text: str) -> "QFormat":
        """Parse ``"18,14"``, ``"Q(18,14)"`` or ``"uQ(20,15)"`` (total, frac)."""
        m = re.fullmatch(r"\s*(u?)Q?\(?\s*(\d+)\s*[,.]\s*(\d+)\s*\)?\s*", text)
        if not m:
            raise ValueError(f"cannot parse Q format {text!r}")
        return cls(int(m.group(2)), int(m.group(3)), signed=not m.group(1))

    def __str__(self) -> str:
        return f"{'' if self.signed else 'u'}Q({self.total_bits},{self.frac_bits})"


DEFAULT_FORMAT = QFormat(18, 14)


@dataclass(frozen=True)
class FixedValue:
    raw: int
    fmt: QFormat
    saturated: bool = False

    @property
    def value(self) -> float:
        return self.raw * self.fmt.step

    def __float__(self) -> float:
        return self.value

    def __neg__(self) -> "FixedValue":
        return _saturate(-self.raw, self.fmt, self.saturated)

    def __add__(self, other: "FixedValue") -> "FixedValue":
        _same_format(self, other)
        return _saturate(self.raw + other.raw, self.fmt, self.saturated or other.saturated)

    def __sub__(self, other: "FixedValue") -> "FixedValue":
        _same_format(self, other)
        return _saturate(self.raw - other.raw, self.fmt, self.saturated or other.saturated)


def _same_format(a: FixedValue, b: FixedValue) -> None:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")


def _saturate(raw: int, fmt: QFormat, already: bool = False) -> FixedValue:
    if raw > fmt.raw_max:
        return FixedValue(fmt.raw_max, fmt, True)
    if raw < fmt.raw_min:
        return FixedValue(fmt.raw_min, fmt, True)
    return FixedValue(int(raw), fmt, already)


def _round_scalar(y: float, tie: str) -> int:
    # y is exact (x * 2**frac is a power-of-two scaling), so floor/compare are exact
    lo = math.floor(y)
    r = y - lo
    if r > 0.5:
        return lo + 1
    if r < 0.5:
        return lo
    if tie == "up":
        return lo + 1
    if tie == "even":
        return lo if lo % 2 == 0 else lo + 1
    return lo + 1 if y > 0 else lo


def quantize(x: float, fmt: QFormat = DEFAULT_FORMAT, tie: Tie = "away") -> FixedValue:
    """Nearest representable value, with saturation flagged."""
    _check_tie(tie)
    if not math.isfinite(x):
        raise ValueError("cannot quantize a non-finite value")
    return _saturate(_round_scalar(math.ldexp(x, fmt.frac_bits), tie), fmt)


def quantize_array(x, fmt: QFormat = DEFAULT_FORMAT, tie: Tie = "away"):
    """Vectorized :func:`quantize`. Returns ``(raw int64 array, saturated mask)``."""
    _check_tie(tie)
    y = np.ldexp(np.asarray(x, dtype=np.float64), fmt.frac_bits)
    if not np.all(np.isfinite(y)):
        raise ValueError("cannot quantize non-finite values")
    lo = np.floor(y)
    r = y - lo
    up = r > 0.5
    at = r == 0.5
    if tie == "up":
        up |= at
    elif tie == "even":
        up |= at & (np.mod(lo, 2) == 1)
    else:
        up |= at & (y > 0)
    q = lo + up
    sat = (q > fmt.raw_max) | (q < fmt.raw_min)
    q = np.clip(q, fmt.raw_min, fmt.raw_max)
    return q.astype(np.int64), sat


def round_shift(raw, shift: int, tie: Tie = "away"):
    """Round ``raw / 2**shift`` to an integer using integer ops only.

    Works on Python ints and int64 arrays alike.
    """
    _check_tie(tie)
    if shift == 0:
        return raw
    half = 1 << (shift - 1)
    mask = (1 << shift) - 1
    if isinstance(raw, np.ndarray):
        lo = raw >> shift  # floor
        rem = raw & mask
        up = rem > half
        at = rem == half
        if tie == "up":
            up |= at
        elif tie == "even":
            up |= at & ((lo & 1) == 1)
        else:
            up |= at & (raw > 0)
        return lo + up.astype(raw.dtype)
    raw = int(raw)
    lo = raw >> shift
    rem = raw & mask
    if rem > half:
        return lo + 1
    if rem < half:
        return lo
    if tie == "up" or (tie == "even" and lo & 1) or (tie == "away" and raw > 0):
        return lo + 1
    return lo


def round_to_integer(v: FixedValue, tie: Tie = "away") -> int:
    return round_shift(v.raw, v.fmt.frac_bits, tie)


def multiply(a: FixedValue, b: FixedValue, out: QFormat, tie: Tie = "away") -> FixedValue:
    """Exact product rounded once into ``out``."""
    p = a.raw * b.raw
    shift = a.fmt.frac_bits + b.fmt.frac_bits - out.frac_bits
    if shift >= 0:
        p = round_shift(p, shift, tie)
    else:
        p = p << -shift
    return _saturate(p, out, a.saturated or b.saturated)
