"""Run configuration: defaults, JSON file, environment and flag overrides.

Keys are dotted paths into a nested dict (``thresholds.low``,
``opponent.wobble_amp``).  Precedence, lowest first: defaults, config file,
``CERTPONG_*`` environment variables, command-line flags.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .agent import ThresholdConfig
from .harness import CompareConfig, OpponentConfig
from .physics import PhysicsConfig

ENV_PREFIX = "CERTPONG_"

DEFAULTS: dict = {
    "agent_kind": "four_net",
    "seeds": [0, 1, 2, 3, 4],
    "epochs": 5_000_000,
    "checkpoints": [500_000, 1_000_000, 2_000_000, 5_000_000],
    "target_points": 10_000,
    "learning_rate": 0.3,
    "thresholds": {"high": 0.95, "window_mean_min": 0.80, "low": 0.30, "grid": 33,
                   "window_size": 10},
    "physics": PhysicsConfig().to_dict(),
    "opponent": {"max_speed": 0.012, "wobble_amp": 0.05, "wobble_freq": 0.37},
    "output_dir": "runs/latest",
    "agent_path": None,
    "record_epochs": False,
    "workers": 1,
    "replay": {"target_points": 3, "frame_every": 10},
}

# flat env names for the keys CI usually needs
ENV_KEYS = {"OUTPUT_DIR": "output_dir", "SEEDS": "seeds", "WORKERS": "workers"}


class ConfigError(ValueError):
    pass


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _set(tree: dict, key: str, value) -> None:
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node[p]
    node[parts[-1]] = value


def _coerce(key: str, raw, default):
    """Convert a flag/env string (or JSON value) to the type of ``default``."""
    if isinstance(raw, str) and default is not None and not isinstance(default, str):
        text = raw.strip()
        try:
            if isinstance(default, list) and not text.startswith("["):
                raw = [json.loads(x) for x in text.split(",") if x.strip()]
            else:
                raw = json.loads(text)
        except json.JSONDecodeError:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    if isinstance(default, bool):
        if not isinstance(raw, bool):
            raise ConfigError(f"{key}: must be true or false")
        return raw
    if isinstance(default, int):
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or int(raw) != raw:
            raise ConfigError(f"{key}: must be an integer")
        return int(raw)
    if isinstance(default, float):
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"{key}: must be a number")
        return float(raw)
    if isinstance(default, list):
        if not isinstance(raw, list) or not all(
                isinstance(x, int) and not isinstance(x, bool) for x in raw):
            raise ConfigError(f"{key}: must be a list of integers")
        return raw
    return raw


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        node = self.values
        for p in key.split("."):
            node = node[p]
        return node

    @property
    def thresholds(self) -> ThresholdConfig:
        return ThresholdConfig(**self.values["thresholds"])

    @property
    def physics(self) -> PhysicsConfig:
        return PhysicsConfig(**self.values["physics"])

    @property
    def opponent(self) -> OpponentConfig:
        return OpponentConfig(**self.values["opponent"])

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output_dir"])

    def compare_config(self) -> CompareConfig:
        return CompareConfig(checkpoints=tuple(self["checkpoints"]), seeds=tuple(self["seeds"]),
                             target_points=self["target_points"], thresholds=self.thresholds,
                             opponent=self.opponent, physics=self.physics,
                             learning_rate=self["learning_rate"], workers=self["workers"])

    def to_json(self) -> str:
        return json.dumps(self.values, indent=2, sort_keys=True) + "\n"

    def write_resolved(self) -> Path:
        out = self.output_dir
        out.mkdir(parents=True, exist_ok=True)
        path = out / "resolved_config.json"
        path.write_text(self.to_json())
        return path


def validate(values: dict) -> None:
    if values["epochs"] < 0:
        raise ConfigError("epochs: must be >= 0")
    if not values["seeds"]:
        raise ConfigError("seeds: at least one seed is required")
    if any(s < 0 for s in values["seeds"]):
        raise ConfigError("seeds: must be non-negative")
    cps = values["checkpoints"]
    if not cps or any(c < 0 for c in cps) or cps != sorted(set(cps)):
        raise ConfigError("checkpoints: must be a non-empty strictly increasing list of epochs >= 0")
    if values["target_points"] < 1:
        raise ConfigError("target_points: must be >= 1")
    if not values["learning_rate"] > 0:
        raise ConfigError("learning_rate: must be > 0")
    if values["agent_kind"] not in ("simple", "four_net", "oracle"):
        raise ConfigError("agent_kind: must be one of simple, four_net, oracle")
    if values["workers"] < 1:
        raise ConfigError("workers: must be >= 1")
    if values["replay"]["target_points"] < 1 or values["replay"]["frame_every"] < 1:
        raise ConfigError("replay: target_points and frame_every must be >= 1")
    for section, cls in (("thresholds", ThresholdConfig), ("physics", PhysicsConfig),
                         ("opponent", OpponentConfig)):
        try:
            cls(**values[section])
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from None


def resolve(path: str | os.PathLike | None = None, overrides: dict | None = None,
            environ: dict | None = None) -> RunConfig:
    """Merge defaults, an optional JSON file, env vars and overrides; validate."""
    values = copy.deepcopy(DEFAULTS)
    known = flatten(DEFAULTS)

    def apply(key, raw, source):
        if key not in known:
            raise ConfigError(f"{key}: unknown key (from {source})")
        _set(values, key, _coerce(key, raw, known[key]))

    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path}: must contain a JSON object")
        for key, raw in flatten(data).items():
            apply(key, raw, path)
    environ = os.environ if environ is None else environ
    for name, key in ENV_KEYS.items():
        if ENV_PREFIX + name in environ:
            apply(key, environ[ENV_PREFIX + name], ENV_PREFIX + name)
    for key, raw in (overrides or {}).items():
        apply(key, raw, "command line")
    validate(values)
    return RunConfig(values)
