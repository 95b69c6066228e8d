"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints one ``CRITERION n: PASS|FAIL - detail`` line.  Run with
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import filecmp
import math
import sys
import time

import numpy as np
import pytest

from cbcsim.analysis import DCBIAS, IDEAL, LFOSC, WaveformRecord, lf_oscillation_metric, total_distortion
from cbcsim.converter import simulate
from cbcsim.fixedpoint import DEFAULT_FORMAT
from cbcsim.modulation import ModulationParams, nlm_array
from cbcsim.scenarios.chirp import run_chirp
from cbcsim.scenarios.config import RunConfig, with_overrides
from cbcsim.scenarios.message import run_message
from cbcsim.scenarios.mix import run_mix
from cbcsim.scenarios.pipeline import tone_levels
from cbcsim.scenarios.single import run_simulate
from cbcsim.scenarios.sweep import run_sweep
from cbcsim.synth import (SynthParams, address_to_index, build_sine_table, derive_timing, initial_address,
                          lf_frequency_hz, predict_lf_oscillation, synthesize_block, unwrapped_addresses)

CFG = RunConfig()
FC = CFG.synth.f_clock


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def desk_sweep():
    return run_sweep(with_overrides(CFG, "sweep", grid="desk"))


def test_criterion_1_zero_sum(desk_sweep, report):
    cells = desk_sweep.cells["improved_adaptive"]
    cycles = sum(c.cycles for c in cells)
    nonzero = sum(c.nonzero_cycles for c in cells)
    clamps = sum(c.clamps for c in cells)
    secs = desk_sweep.seconds["improved_adaptive"]
    ok = (len(cells) == 21 * 200 and min(c.cycles for c in cells) >= 64 and nonzero == 0 and clamps == 0
          and secs < 300)
    report(1, ok, f"{len(cells)} cells, {cycles} cycles, {nonzero} nonzero sums, {clamps} clamps, {secs:.1f} s")
    assert ok


def test_criterion_2_map_structure(desk_sweep, report):
    frac = desk_sweep.fraction
    conv_dc = [c.f for c in desk_sweep.cells["conventional"] if c.category == DCBIAS]
    f_grid = CFG.sweep.f_values()
    log_mid = math.sqrt(f_grid[0] * f_grid[-1])
    conv_hi = bool(conv_dc) and float(np.median(conv_dc)) > log_mid
    imp_bad = 1 - frac("improved", IDEAL)
    ada_bad = 1 - frac("improved_adaptive", IDEAL)
    ok = (frac("conventional", DCBIAS) > 0.10 and conv_hi and frac("inherited", LFOSC) > 0.10
          and imp_bad < 0.02 and ada_bad == 0)
    report(2, ok, f"conventional DCBias {frac('conventional', DCBIAS):.1%} "
                  f"(median f {np.median(conv_dc) if conv_dc else 0:.3g} Hz > {log_mid:.3g}), "
                  f"inherited LFOsc {frac('inherited', LFOSC):.1%}, improved non-Ideal {imp_bad:.2%}, "
                  f"adaptive non-Ideal {ada_bad:.2%}")
    assert ok


def test_criterion_3_lf_prediction(report):
    table = build_sine_table(1024)
    rng = np.random.default_rng(2024)
    rows = []
    while len(rows) < 24:
        f = float(rng.uniform(100e3, 5e6))
        t = derive_timing(SynthParams(f, FC), 1024)
        f_pred = lf_frequency_hz(t, FC)
        if f_pred is None:  # exact division
            continue
        period = abs(float(predict_lf_oscillation(t)))
        n = min(int(max(1000, 8 * period)), (1 << 22) // t.K)
        blk = synthesize_block("inherited", t, table, n).ravel()
        lv = nlm_array(blk, DEFAULT_FORMAT.frac_bits, ModulationParams(1.0)).astype(np.float64)
        r = lf_oscillation_metric(WaveformRecord(FC, lv, FC / t.K))
        err = abs(r.peak_hz - f_pred) / f_pred if r.peak_hz else float("inf")
        rows.append((t.K, err))
    K = np.array([k for k, _ in rows])
    good = np.array([e <= 0.05 for _, e in rows])
    ok = bool(good.all())
    report(3, ok, f"{good.sum()}/{len(rows)} cells within 5% "
                  f"(odd K {good[K % 2 == 1].sum()}/{(K % 2 == 1).sum()}, "
                  f"even K {good[K % 2 == 0].sum()}/{(K % 2 == 0).sum()})")
    assert ok


def test_criterion_4_improved_symmetry(report):
    rng = np.random.default_rng(4)
    tables = {}
    n_sets = pairs_bad = sums_bad = defects = 0
    while n_sets < 1000:
        L = int(2 ** rng.integers(3, 13))
        fc = float(rng.uniform(1e6, 200e6))
        f_o = float(np.exp(rng.uniform(np.log(fc / 20_000), np.log(fc / 2))))
        try:
            t = derive_timing(SynthParams(f_o, fc), L)
        except ValueError:
            continue
        n_sets += 1
        table = tables.setdefault(L, build_sine_table(L))
        a0 = initial_address("improved", t)
        a = unwrapped_addresses(a0, t)
        if not np.all(a + a[::-1] == t.modulus_raw):
            pairs_bad += 1
        s = int(synthesize_block("improved", t, table, 1)[0].sum())
        idx = address_to_index(a % t.modulus_raw, t)
        paired = bool(np.all((idx + idx[::-1]) % L == 0))
        if s != 0:
            if paired:
                sums_bad += 1  # nonzero without a rounding explanation
            else:
                defects += 1
    ok = pairs_bad == 0 and sums_bad == 0 and defects < 0.01 * n_sets
    report(4, ok, f"{n_sets} sets, {pairs_bad} address-pair violations, {sums_bad} unexplained nonzero sums, "
                  f"{defects} quantization defects ({defects / n_sets:.2%})")
    assert ok


@pytest.fixture(scope="module")
def chirp():
    return run_chirp(CFG)


def test_criterion_5_chirp_distortion(chirp, report):
    worst = chirp.max_distortion
    ok = worst < 0.184 and chirp.nominal_peak == 140.0 and abs(chirp.peak_voltage - 140.0) < 0.01
    report(5, ok, f"{len(chirp.windows)} windows, max voltage distortion {worst:.2%}, "
                  f"nominal peak {chirp.nominal_peak:.1f} V, simulated peak {chirp.peak_voltage:.4f} V")
    assert ok


def test_criterion_6_balancing(chirp, report):
    sim = chirp.sim
    ok = sim.spread.max() < 0.10 and sim.max_charge_error < 1e-9 and sim.min_paralleling_loss >= 0
    report(6, ok, f"max spread {sim.spread.max():.2%}, max charge error {sim.max_charge_error:.1e}, "
                  f"min paralleling loss {sim.min_paralleling_loss:.2e} J over {sim.paralleling_events} events")
    assert ok


def test_criterion_7_rl_phasor(report):
    errs = {}
    for f in (10e3, 100e3, 1e6, 5e6):
        lv, starts, _, t = tone_levels(f, 1.0, 40, "improved_adaptive", CFG.synth)
        sim = simulate(lv, CFG.converter, CFG.load, FC, starts)
        f_eff = FC / t.K
        tail = slice(len(lv) - 20 * t.K, len(lv))
        ph = 2 * np.pi * np.arange(20 * t.K) / t.K
        v = total_distortion(WaveformRecord(FC, sim.v_out[tail], f_eff), ph)
        i = total_distortion(WaveformRecord(FC, sim.i_load[tail], f_eff), ph)
        expected = v.amplitude / abs(CFG.load.impedance(f_eff))
        errs[f] = abs(i.amplitude - expected) / expected
    ok = max(errs.values()) < 0.02
    report(7, ok, ", ".join(f"{f:.0e} Hz {e:.2%}" for f, e in errs.items()))
    assert ok


def test_criterion_8_message(report):
    t0 = time.perf_counter()
    arecibo = run_message(CFG)
    rnd = run_message(with_overrides(CFG, "message", bitmap="random"))
    secs = time.perf_counter() - t0
    ok = arecibo.accuracy >= 0.99 and rnd.accuracy >= 0.99 and secs < 120
    report(8, ok, f"arecibo-style {arecibo.accuracy:.2%}, random {rnd.accuracy:.2%}, {secs:.1f} s")
    assert ok


def test_criterion_9_determinism(tmp_path, report):
    small = with_overrides(CFG, "sweep", f_count=8, m_step=0.25)
    runs = {
        "sweep": lambda cfg, d: run_sweep(cfg, d),
        "chirp": run_chirp,
        "mix": run_mix,
        "message": run_message,
        "simulate": run_simulate,
    }
    same = {}
    for name, fn in runs.items():
        dirs = []
        for k in range(2):
            d = tmp_path / f"{name}{k}"
            d.mkdir()
            fn(small, str(d))
            dirs.append(d)
        names = sorted(p.name for p in dirs[0].iterdir())
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        same[name] = bool(names) and not mismatch and not errors and names == sorted(
            p.name for p in dirs[1].iterdir())
    ok = all(same.values())
    report(9, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
