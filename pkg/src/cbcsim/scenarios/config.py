"""Run configuration: dataclasses plus an INI-style file reader.

Every section maps onto one dataclass and every key onto one field.  Unknown
sections or keys are errors, so a typo never silently falls back to a default.

Example::

    [synth]
    table_length = 1024
    f_clock = 100e6
    qformat = 18,14

    [sweep]
    grid = desk
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..converter import ConverterConfig, LoadModel
from ..fixedpoint import TIES, QFormat


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    table_length: int = 1024
    f_clock: float = 100e6
    qformat: str = "18,14"
    tie: str = "away"
    index_mode: str = "round"

    @property
    def fmt(self) -> QFormat:
        return QFormat.parse(self.qformat)

    def __post_init__(self):
        if self.tie not in TIES:
            raise ConfigError(f"tie must be one of {TIES}")
        if self.index_mode not in ("round", "truncate"):
            raise ConfigError("index_mode must be round or truncate")
        QFormat.parse(self.qformat)


@dataclass(frozen=True)
class ModulationConfig:
    n_levels: int = 7


@dataclass(frozen=True)
class AnalysisConfig:
    theta_dc: float = 1e-3
    theta_lf: float = 1e-5
    spectrogram_window: int = 2048
    spectrogram_hop: int = 1024
    spectrogram_fmax: float = 6e6


@dataclass(frozen=True)
class SweepSpec:
    grid: str = "desk"  # desk | full | custom
    m_start: float = 0.0
    m_stop: float = 1.0
    m_step: float = 0.05
    f_start: float = 1e3
    f_stop: float = 5e6
    f_count: int = 200
    f_spacing: str = "log"  # log | linear
    methods: str = "conventional,inherited,improved,improved_adaptive"
    n_cycles: int = 64
    analysis_cycles: int = 64
    analysis_min_cycles: int = 4
    analysis_max_samples: int = 1 << 18

    def m_values(self) -> np.ndarray:
        step = 0.01 if self.grid == "full" else self.m_step
        n = int(round((self.m_stop - self.m_start) / step)) + 1
        return np.round(self.m_start + step * np.arange(n), 10)

    def f_values(self) -> np.ndarray:
        if self.grid == "full":
            return np.arange(1, 5001) * 1e3
        if self.f_spacing == "log":
            return np.geomspace(self.f_start, self.f_stop, self.f_count)
        return np.linspace(self.f_start, self.f_stop, self.f_count)

    def method_list(self) -> list:
        return [s.strip() for s in self.methods.split(",") if s.strip()]


@dataclass(frozen=True)
class ChirpSpec:
    f_start: float = 1e3
    f_end: float = 5e6
    duration: float = 10e-3
    law: str = "exponential"
    m: float = 1.0
    window_cycles: int = 16
    timeseries_stride: int = 10

    def __post_init__(self):
        if not 0 < self.f_start < self.f_end:
            raise ConfigError("need 0 < f_start < f_end")
        if self.law != "exponential":
            raise ConfigError("only the exponential law is implemented")

    def frequency(self, t):
        return self.f_start * (self.f_end / self.f_start) ** (np.asarray(t) / self.duration)


@dataclass(frozen=True)
class MixSpec:
    plan: str = "default"  # "default" or "f:amp:start:end; ..."
    scale: float = 0.875
    duration: float = 1e-3
    cycle_frequency: float = 10e3
    fft_instants: str = "50e-6,150e-6,300e-6,450e-6,550e-6,650e-6,750e-6,900e-6"
    timeseries_stride: int = 10


@dataclass(frozen=True)
class MessageSpec:
    bitmap: str = "arecibo"  # "arecibo", "random", or a path
    rows: int = 23
    columns: int = 73
    f_first: float = 50e3
    f_step: float = 50e3
    column_duration: float = 1e-3
    m: float = 1.0
    window_len: int = 16384
    hop: int = 4096
    timeseries_stride: int = 100


@dataclass(frozen=True)
class SimulateSpec:
    f_o: float = 100e3
    m: float = 1.0
    method: str = "improved_adaptive"
    cycles: int = 32


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    converter: ConverterConfig = field(default_factory=ConverterConfig)
    load: LoadModel = field(default_factory=LoadModel)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    chirp: ChirpSpec = field(default_factory=ChirpSpec)
    mix: MixSpec = field(default_factory=MixSpec)
    message: MessageSpec = field(default_factory=MessageSpec)
    simulate: SimulateSpec = field(default_factory=SimulateSpec)
    seed: int = 0


SECTIONS = ("synth", "modulation", "converter", "load", "analysis", "sweep", "chirp", "mix",
            "message", "simulate")


def _coerce(text: str, typ, key: str):
    try:
        if typ is bool:
            low = text.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if typ is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        if typ is float:
            return float(text)
        return text.strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {typ.__name__}") from None


def with_overrides(cfg: RunConfig, section: str, **kw) -> RunConfig:
    sub = getattr(cfg, section)
    try:
        return dataclasses.replace(cfg, **{section: dataclasses.replace(sub, **kw)})
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    cfg = base or RunConfig()
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        sub = getattr(cfg, section)
        fields = {f.name: type(getattr(sub, f.name)) for f in dataclasses.fields(sub)}
        kw = {}
        for key, value in cp.items(section):
            if key not in fields:
                raise ConfigError(f"unknown key {section}.{key}")
            kw[key] = _coerce(value, fields[key], f"{section}.{key}")
        cfg = with_overrides(cfg, section, **kw)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def documented_keys() -> dict:
    """Section -> {key: default} for every accepted key."""
    cfg = RunConfig()
    return {s: {f.name: getattr(getattr(cfg, s), f.name) for f in dataclasses.fields(getattr(cfg, s))}
            for s in SECTIONS}
