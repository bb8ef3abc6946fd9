"""Simulation parameters and the key-value config file reader."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .interconnect import BEAT_BYTES

PEPTIDE_BUS_MODES = ("broadcast", "shared")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    num_pes: int = 16
    cache_bytes: int = 2048
    dram_latency_cycles: int = 30
    clock_mhz: float = 200.0
    tolerance_da: float = 10.0
    bin_width: float = 1.0
    exclude_tau_zero: bool = False
    seed: int = 0
    # "broadcast": binary-search probes and peptide records travel on a
    # separate pipelined broadcast bus; "shared": all traffic goes through
    # the one arbitrated memory bus.
    peptide_bus: str = "broadcast"
    max_cycles: int = 1 << 40

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.num_pes, int) or self.num_pes < 1:
            raise ConfigError(f"num_pes must be a positive integer, got {self.num_pes!r}")
        if self.cache_bytes < BEAT_BYTES or self.cache_bytes % BEAT_BYTES:
            raise ConfigError(f"cache_bytes must be a multiple of {BEAT_BYTES} and >= {BEAT_BYTES}")
        if self.dram_latency_cycles < 1:
            raise ConfigError("dram_latency_cycles must be >= 1")
        if not self.clock_mhz > 0:
            raise ConfigError("clock_mhz must be positive")
        if self.tolerance_da < 0:
            raise ConfigError("tolerance_da must be non-negative")
        if not self.bin_width > 0:
            raise ConfigError("bin_width must be positive")
        if self.peptide_bus not in PEPTIDE_BUS_MODES:
            raise ConfigError(f"peptide_bus must be one of {PEPTIDE_BUS_MODES}")
        if self.max_cycles < 1:
            raise ConfigError("max_cycles must be positive")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def seconds(self, cycles) -> float:
        return cycles / (self.clock_mhz * 1e6)


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def coerce(key: str, value):
    """Convert a string (or already typed) value to the type of a SimConfig field."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(str(value), 0) if isinstance(value, str) else int(value)
        if isinstance(default, float):
            return float(value)
        return str(value).strip().strip('"')
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path) -> dict:
    """``key = value`` lines (``#`` comments, optional ``[section]`` headers)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[key] = coerce(key, value)
    return out


def make_config(base: SimConfig | None = None, **overrides) -> SimConfig:
    base = base or SimConfig()
    clean = {k: coerce(k, v) for k, v in overrides.items() if v is not None}
    try:
        return dataclasses.replace(base, **clean)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
