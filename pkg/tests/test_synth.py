import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cbcsim.fixedpoint import DEFAULT_FORMAT, FixedValue, QFormat, quantize
from cbcsim.synth import (CycleState, address_to_index, LutSynthesizer, SynthParams, build_sine_table, derive_timing,
                          initial_address, lf_frequency_hz, predict_lf_oscillation, synthesize_block,
                          synthesize_cycle, unwrapped_addresses)

T1024 = build_sine_table(1024)
FC = 100e6


def test_table_examples():
    t4 = build_sine_table(4)
    assert list(t4.values) == [0.0, 1.0, 0.0, -1.0]
    assert T1024[256] == quantize(1.0, DEFAULT_FORMAT)
    assert T1024.samples[0] == 0


def test_table_rejects_bad_length():
    for L in (2, 7, 1023):
        with pytest.raises(ValueError):
            build_sine_table(L)


@given(st.integers(2, 2048).map(lambda n: 2 * n))
@settings(max_examples=40)
def test_table_symmetries(L):
    t = build_sine_table(L)
    s = t.samples
    i = np.arange(L)
    assert np.all(s[(i + L // 2) % L] == -s)
    assert np.all(s[(L - i) % L] == -s)
    # each entry is the quantized sine up to libm's last-ulp differences
    ref = np.array([quantize(math.sin(2 * math.pi * k / L)).raw for k in range(L)])
    assert np.abs(s - ref).max() <= 1


def test_timing_examples():
    t = derive_timing(SynthParams(25e6, FC), 1024)
    assert t.delta_a.value == 256 and t.K == 4
    t = derive_timing(SynthParams(5e6, FC), 1024)
    assert t.delta_a.value == pytest.approx(51.2, abs=2 ** -14) and t.K == 20
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    assert t.delta_a.value == pytest.approx(50.176, abs=2 ** -14) and t.K == 20


def test_timing_rejects_above_nyquist():
    with pytest.raises(ValueError):
        SynthParams(60e6, FC)
    with pytest.raises(ValueError):
        SynthParams(0.0, FC)


def test_initial_address_examples():
    t = derive_timing(SynthParams(5e6, FC), 1024)
    assert initial_address("conventional", t).raw == 0
    assert initial_address("inherited", t).raw == 0  # first cycle
    lsb = 2.0 ** -t.acc_format.frac_bits
    prev = FixedValue(int(round(1020.8 / lsb)), t.acc_format)
    assert initial_address("inherited", t, prev).value == pytest.approx(48.0, abs=2 * lsb)
    assert initial_address("improved", t).value == pytest.approx(25.6, abs=20 * lsb)
    with pytest.raises(ValueError):
        initial_address("zigzag", t)


def direct_cycle_sum(method: str, f_o: float, L: int = 1024) -> int:
    """Oracle: scalar Fraction arithmetic, no numpy, no shared address helpers."""
    F = DEFAULT_FORMAT.frac_bits
    da = Fraction(round(Fraction(L) * Fraction(f_o) / Fraction(FC) * (1 << F)), 1 << F)
    K = round(L / da)
    a0 = Fraction(0) if method == "conventional" else (L - (K - 1) * da) / 2
    total = 0
    for k in range(K):
        a = (a0 + k * da) % L
        if a >= L / 2:
            a -= L  # signed phase
        idx = (math.floor(a + Fraction(1, 2)) if a >= 0 else -math.floor(-a + Fraction(1, 2))) % L
        j = min(idx % (L // 2), L // 2 - idx % (L // 2))
        v = quantize(math.sin(2 * math.pi * j / L)).raw
        total += v if idx < L // 2 else -v
    return total


def test_conventional_nonzero_sum_matches_oracle():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    out = synthesize_cycle(CycleState(0, initial_address("conventional", t), "conventional"), t, T1024)
    assert out.sum_raw() == direct_cycle_sum("conventional", 4.9e6)
    assert out.sum_raw() != 0


def test_improved_zero_sum_matches_oracle():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    out = synthesize_cycle(CycleState(0, initial_address("improved", t), "improved"), t, T1024)
    assert direct_cycle_sum("improved", 4.9e6) == 0
    assert out.sum_raw() == 0


def test_improved_address_pairs_example():
    t = derive_timing(SynthParams(5e6, FC), 1024)
    a = unwrapped_addresses(initial_address("improved", t), t)
    assert np.all(a + a[::-1] == t.modulus_raw)


valid_params = st.tuples(
    st.integers(3, 12).map(lambda e: 1 << e),
    st.floats(1e6, 400e6),
    st.floats(1e-5, 0.5),
)


@given(valid_params)
@settings(max_examples=200, deadline=None)
def test_improved_symmetry_property(p):
    L, fc, ratio = p
    try:
        t = derive_timing(SynthParams(ratio * fc, fc), L)
    except ValueError:
        assume(False)
    assume(t.K <= 200_000)
    a = unwrapped_addresses(initial_address("improved", t), t)
    assert np.all(a + a[::-1] == t.modulus_raw)
    a0 = initial_address("improved", t)
    assert 0 <= a0.raw < t.modulus_raw


@given(valid_params)
@settings(max_examples=100, deadline=None)
def test_improved_indices_pair_and_sum_to_zero(p):
    L, fc, ratio = p
    try:
        t = derive_timing(SynthParams(ratio * fc, fc), L)
    except ValueError:
        assume(False)
    assume(t.K <= 100_000)
    table = build_sine_table(L)
    a0 = initial_address("improved", t)
    out = synthesize_cycle(CycleState(0, a0, "improved"), t, table)
    idx = address_to_index(out.addresses, t)
    assert np.all((idx + idx[::-1]) % L == 0)
    assert out.sum_raw() == 0


@given(st.sampled_from([16, 32, 64, 128]), st.integers(2, 5), st.floats(0.02, 0.5))
@settings(max_examples=60, deadline=None)
def test_inherited_chain_periodic_with_zero_mean(L, frac, ratio):
    fc = 1e6
    try:
        t = derive_timing(SynthParams(ratio * fc, fc), L, frac)
    except ValueError:
        assume(False)
    table = build_sine_table(L)
    mod = t.modulus_raw
    period = mod // math.gcd((t.K * t.step_raw) % mod, mod)
    syn = LutSynthesizer(table, t, "inherited")
    starts = [initial_address("inherited", t).raw]
    total = 0
    for _ in range(period):
        out = syn.next_cycle()
        total += out.sum_raw()
    assert initial_address("inherited", t, out.end_address).raw == starts[0]
    assert total == 0


def test_conventional_cycles_identical():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    b = synthesize_block("conventional", t, T1024, 8)
    assert np.all(b == b[0])
    assert b[0].sum() != 0


@pytest.mark.parametrize("method", ["conventional", "inherited", "improved"])
@pytest.mark.parametrize("f", [4.9e6, 1.234e6, 33e3])
def test_block_matches_stateful_stream(method, f):
    t = derive_timing(SynthParams(f, FC), 1024)
    syn = LutSynthesizer(T1024, t, method)
    chained = np.stack([c.samples for c in syn.cycles(6)])
    assert np.array_equal(chained, synthesize_block(method, t, T1024, 6))


def test_round_index_ties_are_odd_symmetric():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    half = 1 << t.frac_bits  # 0.5 entry in address units
    x = np.array([25 * 2 * half + half, t.modulus_raw - (25 * 2 * half + half)])
    assert list(address_to_index(x, t)) == [26, 1024 - 26]


def test_truncate_index_mode_differs():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    a = synthesize_block("improved", t, T1024, 1, "round")
    b = synthesize_block("improved", t, T1024, 1, "truncate")
    assert not np.array_equal(a, b)
    with pytest.raises(ValueError):
        synthesize_block("improved", t, T1024, 1, "nearest")


def test_lf_prediction_examples():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    assert float(predict_lf_oscillation(t)) == pytest.approx(50.176 / 20.48, rel=1e-4)
    t = derive_timing(SynthParams(25e6, FC), 1024)
    assert predict_lf_oscillation(t) is None
    assert lf_frequency_hz(t, FC) is None


def test_lf_frequency_unit_mapping():
    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    f_eff = t.delta_a.value * FC / 1024
    assert lf_frequency_hz(t, FC) == pytest.approx(abs(FC - t.K * f_eff), rel=1e-12)


def test_lf_prediction_matches_measured_peak_at_4_9mhz():
    from cbcsim.analysis import WaveformRecord, lf_oscillation_metric
    from cbcsim.modulation import ModulationParams, nlm_array

    t = derive_timing(SynthParams(4.9e6, FC), 1024)
    blk = synthesize_block("inherited", t, T1024, 1000).ravel()
    lv = nlm_array(blk, 14, ModulationParams(1.0)).astype(np.float64)
    r = lf_oscillation_metric(WaveformRecord(FC, lv, FC / t.K))
    assert r.peak_hz == pytest.approx(lf_frequency_hz(t, FC), rel=0.05)


def test_small_format_tables_still_symmetric():
    t = build_sine_table(64, QFormat(8, 6))
    assert np.all(t.samples[32:] == -t.samples[:32])
