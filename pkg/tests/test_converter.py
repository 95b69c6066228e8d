import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbcsim.converter import (Connection, ConverterConfig, LoadModel, SimState, apply_parallel_balancing,
                              initial_state, level_to_states, output_voltage, simulate, step, write_timeseries_csv)

CFG = ConverterConfig()
LOAD = LoadModel()
V20 = np.full(7, 20.0)


def test_level_to_states_examples():
    s = level_to_states(3)
    assert list(s[:3]) == [Connection.SERIES_POS] * 3
    assert all(x == Connection.PARALLEL_POS for x in s[3:])
    assert output_voltage(s, V20) == pytest.approx(60.0)
    assert output_voltage(level_to_states(7), V20) == pytest.approx(140.0)
    assert output_voltage(level_to_states(-7), V20) == pytest.approx(-140.0)
    assert output_voltage(level_to_states(0), V20) == 0.0


def test_level_to_states_bypass_when_too_few_free():
    s = level_to_states(6)
    assert (s == Connection.BYPASS_POS).sum() == 1
    s = level_to_states(-2, parallel=False)
    assert (s == Connection.BYPASS_NEG).sum() == 5
    assert Connection.SERIES_NEG.sign == -1 and Connection.PARALLEL_POS.sign == 0


def test_level_to_states_wraps_pointer():
    s = level_to_states(3, pointer=5)
    assert [int(j) for j in np.flatnonzero(s == Connection.SERIES_POS)] == [0, 5, 6]


def test_level_overflow_raises():
    with pytest.raises(ValueError):
        level_to_states(8)
    with pytest.raises(ValueError):
        simulate(np.array([0, 8]))


def test_config_validation():
    with pytest.raises(ValueError):
        ConverterConfig(rotation="random")
    with pytest.raises(ValueError):
        ConverterConfig(source_module_index=9)
    with pytest.raises(ValueError):
        LoadModel(resistance=0)


def test_balancing_example():
    v, loss = apply_parallel_balancing([10.0, 20.0], [1.0, 1.0])
    assert list(v) == [15.0, 15.0]
    assert loss == pytest.approx(0.5 * (25 + 25))


def test_balancing_two_caps_19_21():
    c = 100e-6
    v, loss = apply_parallel_balancing([19.0, 21.0], [c, c])
    assert list(v) == [20.0, 20.0]
    assert loss == pytest.approx(c * 2.0 ** 2 / 4)


@given(st.lists(st.floats(0, 40), min_size=7, max_size=7))
def test_balancing_equal_caps_gives_mean(vs):
    v, _ = apply_parallel_balancing(vs, np.full(7, 10e-3))
    assert np.allclose(v, np.mean(vs), rtol=1e-12, atol=1e-12)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(1e-6, 1.0)), min_size=2, max_size=7))
def test_balancing_conserves_charge_and_loses_energy(mods):
    v = np.array([a for a, _ in mods])
    c = np.array([b for _, b in mods])
    v2, loss = apply_parallel_balancing(v, c)
    assert (c * v2).sum() == pytest.approx((c * v).sum(), rel=1e-12, abs=1e-12)
    assert loss >= 0
    e0, e1 = 0.5 * (c * v ** 2).sum(), 0.5 * (c * v2 ** 2).sum()
    assert e0 - e1 == pytest.approx(loss, rel=1e-9, abs=1e-9)


STIFF = ConverterConfig(capacitance=1e3)  # capacitors that barely move


def test_rl_decay_matches_recursion():
    st0 = initial_state(STIFF, load_current=10.0)
    r = simulate(np.zeros(200, dtype=np.int64), STIFF, LOAD, 100e6, state=st0)
    a = 1e-8 / LOAD.inductance
    expected = 10.0 / (1 + a * LOAD.resistance) ** np.arange(1, 201)
    assert np.allclose(r.i_load, expected, rtol=1e-12)
    # and close to the continuous-time exponential
    tau = LOAD.inductance / LOAD.resistance
    assert r.i_load[-1] == pytest.approx(10.0 * np.exp(-200e-8 / tau), rel=0.05)


def test_dc_steady_state():
    r = simulate(np.full(20_000, 3, dtype=np.int64), STIFF, LOAD, 100e6)
    assert r.i_load[-1] == pytest.approx(60.0 / 2.8, rel=1e-4)


def test_sinusoidal_phasor_at_5mhz():
    # fundamental of a +-7 square wave against V1/|Z|
    K = 20
    lv = np.tile(np.r_[np.full(K // 2, 7), np.full(K // 2, -7)], 400)
    r = simulate(lv, STIFF, LOAD, 100e6)
    n = K * 200
    t = np.arange(n)
    ph = 2 * np.pi * t / K
    i = r.i_load[-n:]
    v = r.v_out[-n:]
    vi = 2 * np.abs(np.mean(v * np.exp(-1j * ph)))
    ii = 2 * np.abs(np.mean(i * np.exp(-1j * ph)))
    assert ii == pytest.approx(vi / abs(LOAD.impedance(5e6)), rel=0.02)


def test_energy_audit_and_charge():
    rng = np.random.default_rng(3)
    lv = rng.integers(-7, 8, size=50_000)
    r = simulate(lv, CFG, LOAD, 100e6)
    assert r.energy_audit_error(LOAD.inductance) < 1e-9
    assert r.max_charge_error < 1e-12
    assert r.paralleling_events > 0
    assert r.min_paralleling_loss >= 0


def test_step_matches_simulate():
    rng = np.random.default_rng(4)
    lv = rng.integers(-7, 8, size=300)
    starts = np.zeros(300, dtype=bool)
    starts[::20] = True
    full = simulate(lv, CFG, LOAD, 100e6, starts)
    s: SimState = initial_state(CFG)
    for k, l in enumerate(lv):
        s = step(s, int(l), 1e-8, CFG, LOAD, bool(starts[k]))
    assert np.allclose(s.cap_voltages, full.final.cap_voltages, rtol=0, atol=1e-12)
    assert s.load_current == pytest.approx(full.final.load_current, abs=1e-12)
    assert s.pointer == full.final.pointer and s.clock == 300


def test_split_run_equals_single_run():
    lv = np.random.default_rng(5).integers(-7, 8, size=1000)
    whole = simulate(lv, CFG, LOAD)
    a = simulate(lv[:400], CFG, LOAD)
    b = simulate(lv[400:], CFG, LOAD, state=a.final)
    assert np.array_equal(np.r_[a.i_load, b.i_load], whole.i_load)


@pytest.mark.parametrize("rotation", ["cycle", "clock", "level"])
def test_rotation_modes_keep_modules_balanced(rotation):
    cfg = ConverterConfig(rotation=rotation)
    K = 100
    lv = np.round(6 * np.sin(2 * np.pi * np.arange(K * 50) / K)).astype(np.int64)
    starts = np.arange(K * 50) % K == 0
    r = simulate(lv, cfg, LOAD, 100e6, starts)
    assert r.spread.max() < 0.05


def test_timeseries_csv(tmp_path):
    r = simulate(np.array([1, 2, 3, -1]), CFG, LOAD, record_stride=2)
    p = tmp_path / "ts.csv"
    write_timeseries_csv(r, p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("time_s,level,v_out_V,i_load_A,V1_V")
    assert len(lines) == 3
    with pytest.raises(ValueError):
        write_timeseries_csv(r, p, stride=3)


def test_modules_view():
    mods = initial_state(CFG).modules
    assert len(mods) == 7 and mods[0].cap_voltage == 20.0
