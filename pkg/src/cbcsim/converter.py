"""Behavioral model of a cascaded double-H-bridge arm driving an RL load.

Each module is a capacitor that can be put in series (either polarity),
bypassed, or paralleled with other non-series modules.  A level command
``l`` puts ``|l|`` modules in series; the rest are paralleled into one group
on balancing clocks, which equalizes their voltages instantly while
conserving charge.  A unidirectional DC source with a current limit sits
across one module and tops up that module (and its parallel group).

Per clock, in order: states from the level, output voltage from the pre-step
capacitor voltages, semi-implicit load-current update, explicit capacitor
update, paralleling, source recharge.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np
from numba import njit

ROTATIONS = {"cycle": 0, "clock": 1, "level": 2}


class Connection(IntEnum):
    BYPASS_POS = 0
    BYPASS_NEG = 1
    SERIES_POS = 2
    SERIES_NEG = 3
    PARALLEL_POS = 4
    PARALLEL_NEG = 5

    @property
    def sign(self) -> int:
        return {2: 1, 3: -1}.get(int(self), 0)


@dataclass(frozen=True)
class ConverterConfig:
    n_modules: int = 7
    nominal_voltage: float = 20.0
    capacitance: float = 10e-3
    source_module_index: int = 4  # 1-based
    source_current_limit: float = 500.0
    balance_interval: int = 1  # clocks between paralleling events
    rotation: str = "level"  # advance the series window on every level change

    def __post_init__(self):
        if self.n_modules < 1:
            raise ValueError("n_modules must be >= 1")
        if not 1 <= self.source_module_index <= self.n_modules:
            raise ValueError("source_module_index outside 1..n_modules")
        if self.capacitance <= 0 or self.nominal_voltage <= 0:
            raise ValueError("capacitance and nominal voltage must be positive")
        if self.balance_interval < 1:
            raise ValueError("balance_interval must be >= 1")
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation must be one of {tuple(ROTATIONS)}")


@dataclass(frozen=True)
class LoadModel:
    resistance: float = 2.8
    inductance: float = 1.5e-6

    def __post_init__(self):
        if self.resistance <= 0 or self.inductance < 0:
            raise ValueError("need resistance > 0 and inductance >= 0")

    def impedance(self, f: float) -> complex:
        return complex(self.resistance, 2 * np.pi * f * self.inductance)


@dataclass(frozen=True)
class ModuleState:
    cap_voltage: float
    capacitance: float
    connection: Connection


@dataclass(frozen=True)
class SimState:
    time: float
    cap_voltages: np.ndarray
    capacitances: np.ndarray
    load_current: float
    output_voltage: float
    connections: np.ndarray
    pointer: int = 0
    clock: int = 0
    last_level: int = 0

    @property
    def modules(self) -> list:
        return [ModuleState(float(v), float(c), Connection(int(s)))
                for v, c, s in zip(self.cap_voltages, self.capacitances, self.connections)]


def initial_state(cfg: ConverterConfig, load_current: float = 0.0) -> SimState:
    n = cfg.n_modules
    return SimState(0.0, np.full(n, cfg.nominal_voltage), np.full(n, cfg.capacitance),
                    load_current, 0.0, np.zeros(n, dtype=np.int64))


@njit(cache=True)
def _assign(level, n, pointer, parallel, out):
    """Fill ``out`` with connection codes; returns number of free modules."""
    a = abs(level)
    ser = 2 if level >= 0 else 3
    free_code = (4 if level >= 0 else 5) if parallel else (0 if level >= 0 else 1)
    for j in range(n):
        out[j] = free_code
    for j in range(a):
        out[(pointer + j) % n] = ser
    return n - a


def level_to_states(level: int, n_modules: int = 7, pointer: int = 0, parallel: bool = True) -> np.ndarray:
    """Series modules are ``pointer, pointer+1, ...`` (mod n); the rest are
    Parallel± on balancing clocks (if at least two are free) else Bypass±."""
    if abs(level) > n_modules:
        raise ValueError(f"|level|={abs(level)} exceeds {n_modules} modules")
    out = np.zeros(n_modules, dtype=np.int64)
    free = n_modules - abs(level)
    _assign(level, n_modules, pointer, parallel and free >= 2, out)
    return out


def output_voltage(connections: np.ndarray, cap_voltages: np.ndarray) -> float:
    sign = np.where(connections == 2, 1.0, np.where(connections == 3, -1.0, 0.0))
    return float(sign @ cap_voltages)


def apply_parallel_balancing(voltages, capacitances):
    """Charge-conserving equalization; returns (new voltages, energy lost)."""
    v = np.asarray(voltages, dtype=np.float64)
    c = np.asarray(capacitances, dtype=np.float64)
    vp = float((c * v).sum() / c.sum())
    loss = 0.5 * float((c * (v - vp) ** 2).sum())
    return np.full_like(v, vp), loss


# accumulator slots
E_LOAD, E_PAR, E_SRC, E_NUM, Q_ERR, N_TRANS, N_PAR, PAR_MIN = range(8)


@njit(cache=True)
def _run(levels, starts, v, c, i0, prev_states, pointer, clock0, last_level,
         dt, R, Lind, vnom, src, ilim, interval, rotation, stride,
         v_out, i_out, spread, vrec, acc):
    n = v.shape[0]
    st = np.empty(n, dtype=np.int64)
    i = i0
    alpha = dt / Lind if Lind > 0 else 0.0
    for k in range(levels.shape[0]):
        lv = levels[k]
        if rotation == 0 and starts[k]:
            pointer = (pointer + 1) % n
        elif rotation == 1 and k + clock0 > 0:
            pointer = (pointer + 1) % n
        elif rotation == 2 and lv != last_level:
            pointer = (pointer + 1) % n
        last_level = lv
        balance = (clock0 + k) % interval == 0
        free = n - abs(lv)
        par = balance and free >= 2
        _assign(lv, n, pointer, par, st)
        vo = 0.0
        for j in range(n):
            if st[j] == 2:
                vo += v[j]
            elif st[j] == 3:
                vo -= v[j]
        if Lind > 0:
            inew = (i + alpha * vo) / (1.0 + alpha * R)
        else:
            inew = vo / R
        num = 0.5 * Lind * (inew - i) ** 2
        for j in range(n):
            s = 1.0 if st[j] == 2 else (-1.0 if st[j] == 3 else 0.0)
            if s != 0.0:
                dq = s * inew * dt
                v[j] -= dq / c[j]
                num -= 0.5 * dq * dq / c[j]
        acc[E_LOAD] += R * inew * inew * dt
        acc[E_NUM] += num
        i = inew
        src_in_group = False
        if par:
            qs = 0.0
            cs = 0.0
            for j in range(n):
                if st[j] >= 4:
                    qs += c[j] * v[j]
                    cs += c[j]
            vp = qs / cs
            loss = 0.0
            q2 = 0.0
            for j in range(n):
                if st[j] >= 4:
                    loss += 0.5 * c[j] * (v[j] - vp) ** 2
                    v[j] = vp
                    q2 += c[j] * vp
            err = abs(q2 - qs) / abs(qs) if qs != 0 else 0.0
            if err > acc[Q_ERR]:
                acc[Q_ERR] = err
            acc[E_PAR] += loss
            if loss < acc[PAR_MIN]:
                acc[PAR_MIN] = loss
            acc[N_PAR] += 1
            src_in_group = st[src] >= 4
        # unidirectional source with current limit
        if src_in_group:
            cg = 0.0
            for j in range(n):
                if st[j] >= 4:
                    cg += c[j]
            vg = v[src]
            if vg < vnom:
                dq = min(ilim * dt, cg * (vnom - vg))
                v2 = vg + dq / cg
                acc[E_SRC] += 0.5 * cg * (v2 * v2 - vg * vg)
                for j in range(n):
                    if st[j] >= 4:
                        v[j] = v2
        else:
            vg = v[src]
            if vg < vnom:
                dq = min(ilim * dt, c[src] * (vnom - vg))
                v2 = vg + dq / c[src]
                acc[E_SRC] += 0.5 * c[src] * (v2 * v2 - vg * vg)
                v[src] = v2
        trans = 0
        for j in range(n):
            if st[j] != prev_states[j]:
                trans += 1
            prev_states[j] = st[j]
        acc[N_TRANS] += trans
        mean = 0.0
        for j in range(n):
            mean += v[j]
        mean /= n
        worst = 0.0
        for j in range(n):
            d = abs(v[j] - mean) / mean
            if d > worst:
                worst = d
        spread[k] = worst
        v_out[k] = vo
        i_out[k] = i
        if k % stride == 0:
            for j in range(n):
                vrec[k // stride, j] = v[j]
    return i, pointer, last_level


@dataclass
class SimResult:
    dt: float
    levels: np.ndarray
    v_out: np.ndarray
    i_load: np.ndarray
    spread: np.ndarray  # max |V_j - mean| / mean after each clock
    module_voltages: np.ndarray  # every ``stride`` clocks
    stride: int
    final: SimState
    initial: SimState
    energy_load: float = 0.0
    energy_paralleling: float = 0.0
    energy_source: float = 0.0
    energy_integrator: float = 0.0
    max_charge_error: float = 0.0
    min_paralleling_loss: float = 0.0
    transitions: int = 0
    paralleling_events: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def time(self) -> np.ndarray:
        return np.arange(len(self.levels)) * self.dt

    def stored_energy(self, s: SimState, inductance: float) -> float:
        return 0.5 * float((s.capacitances * s.cap_voltages ** 2).sum()) + 0.5 * inductance * s.load_current ** 2

    def energy_audit_error(self, inductance: float) -> float:
        """Relative mismatch of source energy vs. sinks plus stored-energy change."""
        d = self.stored_energy(self.final, inductance) - self.stored_energy(self.initial, inductance)
        rhs = self.energy_load + self.energy_paralleling + self.energy_integrator + d
        scale = max(abs(self.energy_source), abs(self.energy_load), 1e-300)
        return abs(self.energy_source - rhs) / scale


def simulate(levels, cfg: ConverterConfig = ConverterConfig(), load: LoadModel = LoadModel(),
             f_clock: float = 100e6, cycle_starts: Optional[np.ndarray] = None,
             state: Optional[SimState] = None, record_stride: int = 1) -> SimResult:
    levels = np.ascontiguousarray(levels, dtype=np.int64)
    n = cfg.n_modules
    if levels.size and np.abs(levels).max() > n:
        raise ValueError(f"level command exceeds {n} modules")
    state = state or initial_state(cfg)
    starts = (np.zeros(len(levels), dtype=np.bool_) if cycle_starts is None
              else np.ascontiguousarray(cycle_starts, dtype=np.bool_))
    dt = 1.0 / f_clock
    v = state.cap_voltages.astype(np.float64).copy()
    c = state.capacitances.astype(np.float64).copy()
    prev = state.connections.astype(np.int64).copy()
    m = len(levels)
    v_out = np.empty(m)
    i_out = np.empty(m)
    spread = np.empty(m)
    vrec = np.empty(((m + record_stride - 1) // record_stride, n))
    acc = np.zeros(8)
    acc[PAR_MIN] = np.inf
    i, pointer, last = _run(levels, starts, v, c, float(state.load_current), prev, state.pointer,
                            state.clock, state.last_level, dt, load.resistance, load.inductance,
                            cfg.nominal_voltage, cfg.source_module_index - 1, cfg.source_current_limit,
                            cfg.balance_interval, ROTATIONS[cfg.rotation], record_stride,
                            v_out, i_out, spread, vrec, acc)
    final = SimState(state.time + m * dt, v, c, float(i), float(v_out[-1]) if m else state.output_voltage,
                     prev, int(pointer), state.clock + m, int(last))
    return SimResult(dt, levels, v_out, i_out, spread, vrec, record_stride, final, state,
                     acc[E_LOAD], acc[E_PAR], acc[E_SRC], acc[E_NUM], acc[Q_ERR],
                     acc[PAR_MIN] if acc[N_PAR] else 0.0, int(acc[N_TRANS]), int(acc[N_PAR]))


def step(state: SimState, level: int, dt: float, cfg: ConverterConfig = ConverterConfig(),
         load: LoadModel = LoadModel(), cycle_start: bool = False) -> SimState:
    """Advance one clock; same kernel as :func:`simulate`."""
    r = simulate(np.array([level]), cfg, load, 1.0 / dt, np.array([cycle_start]), state)
    return r.final


def write_timeseries_csv(res: SimResult, path, stride: Optional[int] = None) -> None:
    """Columns: time_s, level, v_out_V, i_load_A, V1_V..Vn_V (every ``stride`` clocks)."""
    stride = stride or res.stride
    if stride % res.stride:
        raise ValueError("CSV stride must be a multiple of the recording stride")
    n = res.module_voltages.shape[1]
    idx = np.arange(0, len(res.levels), stride)
    with open(path, "w") as fh:
        fh.write("time_s,level,v_out_V,i_load_A," + ",".join(f"V{j + 1}_V" for j in range(n)) + "\n")
        for k in idx:
            mv = res.module_voltages[k // res.stride]
            fh.write(f"{k * res.dt:.9e},{res.levels[k]},{res.v_out[k]:.6f},{res.i_load[k]:.6f},"
                     + ",".join(f"{x:.6f}" for x in mv) + "\n")


__all__ = [
    "Connection", "ConverterConfig", "LoadModel", "ModuleState", "SimState", "SimResult",
    "initial_state", "level_to_states", "output_voltage", "apply_parallel_balancing",
    "simulate", "step", "write_timeseries_csv",
]
