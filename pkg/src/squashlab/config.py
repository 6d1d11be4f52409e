"""Scenario configuration: flat ``key = value`` files plus command-line overrides."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

from .errors import ConfigError
from .params import FEASIBILITY_TOL

MODES = ("spectra", "loop-sim", "atom", "fluorescence", "verify")
AUTO = "auto"
# config key -> command-line flag, where they differ beyond '_' vs '-'
FLAG_NAMES = {"epsilon_x": "ex", "epsilon_y": "ey"}


def flag_for(key):
    return "--" + FLAG_NAMES.get(key, key).replace("_", "-")


@dataclass
class ScenarioConfig:
    mode: str = "spectra"
    out: str | None = None
    seed: int = 0
    L: float = 1.0
    eta: float = 1.0
    gx: float | str = AUTO  # "auto": optimal gain for the channel (0 if absent)
    gy: float | str = AUTO
    epsilon_x: float = 0.0
    epsilon_y: float = 0.0
    tau: float = 0.001
    bandwidth: float = 100.0
    dt: float = 1e-4
    samples: int = 2**22
    omega_min: float = 0.0
    omega_max: float = 20.0
    n_bins: int = 201
    segment_length: int = 2**16
    quadrature: str = "X"
    x0: float = 0.0
    y0: float = 0.0
    z0: float = 1.0
    t_max: float = 10.0

    def echo(self):
        return "\n".join(f"{f.name} = {getattr(self, f.name)}" for f in fields(self))


FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}
INT_KEYS = {"seed", "samples", "n_bins", "segment_length"}
STR_KEYS = {"mode", "out", "quadrature"}
GAIN_KEYS = {"gx", "gy"}


def parse_value(key, text, where):
    if key not in FIELD_TYPES:
        raise ConfigError(f"{where}: unknown key {key!r}")
    text = text.strip()
    if key in STR_KEYS:
        return text
    if key in GAIN_KEYS and text.lower() == AUTO:
        return AUTO
    try:
        if key in INT_KEYS:
            return int(text)
        value = float(text)  # locale-independent, '.' decimal separator
    except ValueError:
        raise ConfigError(f"{where}: malformed number for {key!r}: {text!r}") from None
    if math.isnan(value):
        raise ConfigError(f"{where}: {key} is NaN")
    return value


def load_config(path):
    """Read a config file; returns ``{key: (value, 'path:line N')}``."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:line {lineno}"
            if "=" not in line:
                raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
            key, text = (s.strip() for s in line.split("=", 1))
            entries[key] = (parse_value(key, text, where), where)
    return entries


def build_config(file_entries=None, overrides=None):
    """Merge defaults, file values and flag overrides, then validate.

    ``overrides`` maps keys to already-typed values (from flags). The seed
    falls back to ``SQUASHLAB_SEED`` when neither source gives one.
    """
    file_entries = file_entries or {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    values, origin = {}, {}
    for key, (value, where) in file_entries.items():
        values[key], origin[key] = value, where
    for key, value in overrides.items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        values[key], origin[key] = value, flag_for(key)
    if "seed" not in values and os.environ.get("SQUASHLAB_SEED"):
        values["seed"] = parse_value("seed", os.environ["SQUASHLAB_SEED"], "SQUASHLAB_SEED")
        origin["seed"] = "SQUASHLAB_SEED"
    cfg = ScenarioConfig(**values)
    validate(cfg, origin)
    return cfg


def _at(origin, *keys):
    srcs = [origin[k] for k in keys if k in origin]
    return f" ({', '.join(srcs)})" if srcs else ""


def validate(cfg: ScenarioConfig, origin=None):
    origin = origin or {}

    def fail(msg, *keys):
        raise ConfigError(msg + _at(origin, *keys))

    if cfg.mode not in MODES:
        fail(f"mode must be one of {', '.join(MODES)}, got {cfg.mode!r}", "mode")
    for key in ("epsilon_x", "epsilon_y"):
        if not 0.0 <= getattr(cfg, key) <= 1.0:
            fail(f"{key} must lie in [0, 1]", key)
    if cfg.epsilon_x + cfg.epsilon_y > 1.0 + FEASIBILITY_TOL:
        fail("epsilon_x + epsilon_y > 1", "epsilon_x", "epsilon_y")
    if not 0.0 <= cfg.eta <= 1.0:
        fail("eta must lie in [0, 1]", "eta")
    if not (cfg.L > 0 and math.isfinite(cfg.L)):
        fail("L must be finite and > 0", "L")
    for key in GAIN_KEYS:
        g = getattr(cfg, key)
        if g != AUTO and (not math.isfinite(g) or g == 1.0):
            fail(f"{key} must be finite and != 1", key)
    if cfg.tau < 0:
        fail("tau must be >= 0", "tau")
    if not cfg.bandwidth > 0:
        fail("bandwidth must be > 0", "bandwidth")
    if not cfg.dt > 0:
        fail("dt must be > 0", "dt")
    if cfg.samples <= 0 or cfg.samples & (cfg.samples - 1):
        fail("samples must be a power of two", "samples")
    if cfg.segment_length <= 0 or cfg.segment_length & (cfg.segment_length - 1):
        fail("segment_length must be a power of two", "segment_length")
    if cfg.segment_length > cfg.samples:
        fail("segment_length must not exceed samples", "segment_length", "samples")
    if cfg.n_bins < 2:
        fail("n_bins must be >= 2", "n_bins")
    if not cfg.omega_max > cfg.omega_min:
        fail("omega_max must exceed omega_min", "omega_min", "omega_max")
    if cfg.quadrature not in ("X", "Y"):
        fail("quadrature must be X or Y", "quadrature")
    if cfg.x0**2 + cfg.y0**2 + cfg.z0**2 > 1.0 + 1e-10:
        fail("initial Bloch vector lies outside the sphere", "x0", "y0", "z0")
    if cfg.t_max < 0:
        fail("t_max must be >= 0", "t_max")
    return cfg
