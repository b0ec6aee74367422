"""Experiment configuration (JSON) and its validation.

Units are part of the field names.  Minimal example::

    {
      "scene": {"preset": "default", "t_hours": 10000, "sigma2_w2": 1e-12},
      "scenarios": [1, 2, 3],
      "sweep": {"noise": {"sigma2_w2": [1e-10, 1e-12, 1e-14]}},
      "trials": 500, "master_seed": 1, "outputs": "out"
    }

See ``docs/config.md`` for every field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .estimators import Scenario, SearchOptions
from .geometry import Box, LedTransmitter, ReceiverModel
from .radiometry import NoiseModel
from .scene import LED_GRID, ROOM, Scene

SWEEP_KINDS = ("noise", "alpha", "path")


@dataclass(frozen=True)
class NoiseSweep:
    sigma2_w2: tuple


@dataclass(frozen=True)
class AlphaSweep:
    decay_rates_per_hour: tuple
    sigma2_w2: tuple


@dataclass(frozen=True)
class PathSweep:
    start_m: np.ndarray
    end_m: np.ndarray
    steps: int
    sigma2_w2: tuple

    def waypoints(self) -> np.ndarray:
        return np.linspace(self.start_m, self.end_m, self.steps)


@dataclass(frozen=True)
class ExperimentConfig:
    scene: Scene
    scenarios: tuple = (1, 2, 3)
    sweeps: dict = field(default_factory=dict)  # kind -> NoiseSweep | AlphaSweep | PathSweep
    trials: int = 500
    master_seed: int = 0
    outputs: str = "out"
    search: SearchOptions = field(default_factory=SearchOptions)
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)  # echoed into the run manifest

    def sweep(self, kind: str):
        if kind not in self.sweeps:
            raise ConfigError(f"config has no '{kind}' sweep (has: {sorted(self.sweeps)})")
        return self.sweeps[kind]


def _vec(d, key, default=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"missing field '{key}'")
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"'{key}' must be a list of 3 finite numbers, got {v!r}")
    return arr


def _positive_list(d, key) -> tuple:
    vals = d.get(key)
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"'{key}' must be a non-empty list")
    try:
        vals = tuple(float(v) for v in vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{key}' must contain numbers: {exc}") from None
    if not all(v > 0 and np.isfinite(v) for v in vals):
        raise ConfigError(f"'{key}' values must be finite and > 0, got {vals}")
    return vals


def _unit(v, what):
    v = np.asarray(v, float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or not n > 0:
        raise ConfigError(f"{what} must be a non-zero 3-vector")
    return v / n


def scene_from_dict(d: dict) -> Scene:
    try:
        led_defaults = {"orientation": [0, 0, -1], "lambertian_order": 1.0,
                        "initial_power_w": 10.0, "decay_rate_per_hour": 1e-5}
        led_defaults.update(d.get("led_defaults", {}))
        if "leds" in d:
            specs = d["leds"]
        elif d.get("preset", "default") == "default":
            specs = [{"position_m": list(p)} for p in LED_GRID]
        else:
            raise ConfigError(f"unknown scene preset {d.get('preset')!r}")
        leds = []
        for spec in specs:
            s = {**led_defaults, **spec}
            leds.append(LedTransmitter(
                _vec(s, "position_m"), _unit(s["orientation"], "LED orientation"),
                float(s["lambertian_order"]), float(s["initial_power_w"]),
                float(s["decay_rate_per_hour"])))
        r = d.get("receiver", {})
        region = r.get("region_m", {"lo": ROOM.lo.tolist(), "hi": ROOM.hi.tolist()})
        rx = ReceiverModel(_unit(r.get("orientation", [0, 0, 1]), "receiver orientation"),
                           float(r.get("pd_area_m2", 1e-4)),
                           float(r.get("responsivity_a_per_w", 1.0)),
                           Box(_vec(region, "lo"), _vec(region, "hi")))
        if "sigma2_w2_per_led" in d:
            noise = NoiseModel(np.asarray(d["sigma2_w2_per_led"], float))
        else:
            noise = NoiseModel.equal(float(d.get("sigma2_w2", 1e-12)), len(leds))
        true_pos = _vec(d, "true_position_m", [0.5, 0.5, 0.85])
        if not rx.region.contains(true_pos):
            raise ConfigError(f"true position {true_pos} outside receiver region")
        return Scene(tuple(leds), rx, noise, true_pos, float(d.get("t_hours", 10000.0)))
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid scene: {exc}") from None


def _sweeps_from_dict(d: dict, region: Box) -> dict:
    out = {}
    for kind, spec in d.items():
        if kind == "noise":
            out[kind] = NoiseSweep(_positive_list(spec, "sigma2_w2"))
        elif kind == "alpha":
            rates = spec.get("decay_rates_per_hour")
            if not isinstance(rates, list) or not rates or not all(
                    isinstance(a, (int, float)) and a >= 0 for a in rates):
                raise ConfigError("'decay_rates_per_hour' must be a non-empty list of numbers >= 0")
            out[kind] = AlphaSweep(tuple(float(a) for a in rates),
                                   _positive_list(spec, "sigma2_w2"))
        elif kind == "path":
            start, end = _vec(spec, "start_m"), _vec(spec, "end_m")
            if not (region.contains(start) and region.contains(end)):
                raise ConfigError("path endpoints must lie inside the receiver region")
            steps = spec.get("steps")
            if not isinstance(steps, int) or steps < 2:
                raise ConfigError("'steps' must be an integer >= 2")
            out[kind] = PathSweep(start, end, steps, _positive_list(spec, "sigma2_w2"))
        else:
            raise ConfigError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    return out


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    scene = scene_from_dict(d.get("scene", {}))
    try:
        scenarios = tuple(int(Scenario(int(s))) for s in d.get("scenarios", [1, 2, 3]))
    except (ValueError, TypeError):
        raise ConfigError(f"scenarios must be a subset of [1, 2, 3], got {d.get('scenarios')}") from None
    if not scenarios:
        raise ConfigError("at least one scenario is required")
    trials = d.get("trials", 500)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"trials must be an integer >= 1, got {trials!r}")
    seed = d.get("master_seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"master_seed must be an integer, got {seed!r}")
    workers = d.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be an integer >= 1, got {workers!r}")
    s = d.get("search", {})
    search = SearchOptions(tuple(s.get("grid_shape", (41, 41, 31))), float(s.get("xtol_m", 1e-5)),
                           int(s.get("max_iter", 200)))
    return ExperimentConfig(scene, tuple(sorted(set(scenarios))),
                            _sweeps_from_dict(d.get("sweep", {}), scene.receiver.region),
                            trials, seed, str(d.get("outputs", "out")), search, workers, d)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def default_config_path() -> Path:
    return Path(__file__).parent / "data" / "nine_led_room.json"
