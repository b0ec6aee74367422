"""Forward model: LED power decay and received-power measurements.

Noise is drawn from ``numpy.random.Philox`` (a counter-based generator) keyed
through ``numpy.random.SeedSequence``.  A measurement's noise depends only on
the integer key it is generated with, so Monte Carlo trials can be run in any
order or on any number of workers and still give bit-identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, LedArray, ReceiverModel, as_vec3, lambertian_gain

_U64 = 2**64


@dataclass(frozen=True)
class NoiseModel:
    variances: np.ndarray  # W^2, one per LED

    def __post_init__(self):
        var = np.asarray(self.variances, dtype=float).reshape(-1)
        if var.size == 0 or not np.all(var > 0) or not np.all(np.isfinite(var)):
            raise ValueError(f"noise variances must be finite and > 0, got {var}")
        object.__setattr__(self, "variances", var)

    @classmethod
    def equal(cls, sigma2: float, n: int) -> "NoiseModel":
        return cls(np.full(n, float(sigma2)))

    def scaled(self, factor: float) -> "NoiseModel":
        return NoiseModel(self.variances * factor)

    def __len__(self):
        return self.variances.size


@dataclass(frozen=True)
class MeasurementSet:
    powers: np.ndarray  # W, may be negative
    elapsed_hours: float
    led_count: int

    def __post_init__(self):
        p = np.asarray(self.powers, dtype=float).reshape(-1)
        if p.size != self.led_count:
            raise ValueError(f"{p.size} powers for {self.led_count} LEDs")
        if not self.elapsed_hours >= 0:
            raise ValueError(f"elapsed time must be >= 0, got {self.elapsed_hours}")
        object.__setattr__(self, "powers", p)


def rng_stream(*keys: int) -> np.random.Generator:
    """Independent Philox stream for an integer key tuple, e.g. (master_seed, point, trial)."""
    entropy = [int(k) % _U64 for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _leds(leds) -> LedArray:
    return leds if isinstance(leds, LedArray) else LedArray.from_leds(leds)


def transmit_power(led, t_hours: float) -> float:
    if t_hours < 0:
        raise ValueError(f"operating time must be >= 0, got {t_hours}")
    return float(led.initial_power * np.exp(-led.decay_rate * t_hours))


def decayed_powers(leds, t_hours: float, decay_rates=None) -> np.ndarray:
    """Per-LED transmit power after ``t_hours``; ``decay_rates`` overrides the LEDs' own."""
    if t_hours < 0:
        raise ValueError(f"operating time must be >= 0, got {t_hours}")
    arr = _leds(leds)
    rates = arr.decay_rates if decay_rates is None else np.broadcast_to(
        np.asarray(decay_rates, dtype=float), arr.decay_rates.shape)
    return arr.initial_powers * np.exp(-rates * t_hours)


def noiseless_received(leds, rx: ReceiverModel, rx_pos, t_hours: float) -> np.ndarray:
    arr = _leds(leds)
    p = as_vec3(rx_pos, "receiver position")
    h = lambertian_gain(arr, rx, p)
    if np.any(~np.isfinite(h)):
        raise GeometryError(f"channel undefined at receiver position {p}")
    return rx.responsivity * decayed_powers(arr, t_hours) * h


def simulate_measurements(leds, rx: ReceiverModel, rx_pos, t_hours: float,
                          noise: NoiseModel, seed) -> MeasurementSet:
    """Noisy received powers; ``seed`` is an int or a tuple of ints."""
    mean = noiseless_received(leds, rx, rx_pos, t_hours)
    if len(noise) != mean.size:
        raise ValueError(f"{len(noise)} noise variances for {mean.size} LEDs")
    keys = seed if isinstance(seed, tuple) else (seed,)
    eta = rng_stream(*keys).standard_normal(mean.size) * np.sqrt(noise.variances)
    return MeasurementSet(mean + eta, float(t_hours), mean.size)


def simulate_batch(mean: np.ndarray, noise: NoiseModel, keys) -> np.ndarray:
    """Stack of noisy measurement vectors, row k drawn from ``rng_stream(*keys[k])``.

    Row k equals ``simulate_measurements(..., seed=keys[k]).powers`` for the
    same noiseless ``mean``.
    """
    sd = np.sqrt(noise.variances)
    out = np.empty((len(keys), mean.size))
    for k, key in enumerate(keys):
        out[k] = mean + rng_stream(*key).standard_normal(mean.size) * sd
    return out
