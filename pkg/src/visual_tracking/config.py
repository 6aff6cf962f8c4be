"""Experiment configuration: a flat INI file with JSON-literal values.

Every field is addressed as ``section.key`` (for overrides and sweeps).
Unknown sections or keys are rejected.
"""
import configparser
import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError

DEFAULTS = {
    "sim": {
        "dt": 0.005,
        "duration": 30.0,
        "log_every": 1,
        "settle_time": 20.0,
        "seed": 0,
    },
    "camera": {
        "focal_length": 0.15,
        "beta": 900.0,
        "offset": 5.0,
        "principal_point": [0.0, 0.0],
    },
    "arm": {
        "link_lengths": [2.0, 2.0, 2.0],
        "link_masses": [2.0, 2.0, 2.0],
        "link_radius": 0.1,
        "gravity": 9.81,
        "feature_offsets": [[0.0, 0.0, 0.0]],
    },
    "gains": {
        "K": 0.001,
        "alpha": 10.0,
        "gamma": 10.0,
        "Gamma_d": 300.0,
        "Gamma_z_perp": 600.0,
        "Gamma_z": 0.2,
    },
    "trajectory": {
        "center": [45.0, 65.0],
        "radius": 20.0,
        "omega": math.pi / 3.0,
    },
    "initial": {
        "q": [1.1, 0.8, -1.0],
        "qdot": [0.0, 0.0, 0.0],
        "x_o": None,
        "l2_hat": 3.0,
        "l3_hat": 3.0,
        "offset_hat": 3.0,
        "focal_length_hat": 0.1,
        "beta_hat": 700.0,
        "a_d_hat": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 15.0, 0.0],
    },
    "projection": {
        "a_z_lower": [-1e300, -1e300, -1e300],
        "a_z_upper": [1e300, 1e300, 1e300],
        "a_z_perp_lower": [-1e300, -1e300],
        "a_z_perp_upper": [1e300, 1e300],
    },
    "monitor": {
        "slack": 1e-6,
    },
    "audit": {
        "features": [[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, 0.3, 0.1]],
        "samples": 1000,
        "pixel_range": 500.0,
    },
    "extensions": {
        "pixel_noise_std": 0.0,
        "sampled_data": False,
    },
}

PRESETS = ("paper-sec4",)


def _coerce(key, default, value):
    """Check ``value`` against the type of ``default``."""
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: not a numeric list: {value!r}") from exc
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"{key}: entries must be finite")
        return value
    return value


def parse_value(key, text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{key}: cannot parse value {text!r} ({exc.msg})") from exc


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = "<defaults>"

    def get(self, dotted):
        section, key = _split(dotted)
        return self.values[section][key]

    def set(self, dotted, value):
        section, key = _split(dotted)
        self.values[section][key] = _coerce(dotted, DEFAULTS[section][key], value)

    def copy(self):
        return ExperimentConfig(copy.deepcopy(self.values), self.source)

    def with_overrides(self, overrides):
        """Apply ``key=value`` strings or a mapping of dotted keys."""
        out = self.copy()
        items = overrides.items() if isinstance(overrides, dict) else (_split_override(o) for o in overrides)
        for k, v in items:
            out.set(k, parse_value(k, v) if isinstance(v, str) else v)
        return out

    def to_ini(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, entries in self.values.items():
            parser[section] = {k: json.dumps(v) for k, v in entries.items()}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)

    def write(self, path):
        Path(path).write_text(self.to_ini())


def _split(dotted):
    if "." not in dotted:
        # a bare key is accepted when it names exactly one field
        owners = [s for s, entries in DEFAULTS.items() if dotted in entries]
        if len(owners) != 1:
            raise ConfigError(f"config key {dotted!r} is unknown or ambiguous; use section.key")
        return owners[0], dotted
    if dotted.count(".") != 1:
        raise ConfigError(f"config keys are addressed as section.key, got {dotted!r}")
    section, key = dotted.split(".")
    if section not in DEFAULTS:
        raise ConfigError(f"unknown config section {section!r}")
    if key not in DEFAULTS[section]:
        raise ConfigError(f"unknown config key {dotted!r}")
    return section, key


def _split_override(text):
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def loads(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = ExperimentConfig(source=source)
    for section in parser.sections():
        for key, raw in parser[section].items():
            cfg.set(f"{section}.{key}", parse_value(f"{section}.{key}", raw))
    return cfg


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, source=str(path))


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("visual_tracking.presets").joinpath(f"{name}.ini").read_text()
    return loads(text, source=f"preset:{name}")
