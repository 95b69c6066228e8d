"""End-to-end experiments: sweep maps, chirp, channel mixture, spectrogram message."""
from .chirp import run_chirp
from .config import ConfigError, RunConfig, load_config, parse_config
from .message import run_message
from .mix import run_mix
from .single import run_simulate
from .sweep import run_sweep

__all__ = ["run_chirp", "run_message", "run_mix", "run_simulate", "run_sweep", "RunConfig", "ConfigError",
           "load_config", "parse_config"]
