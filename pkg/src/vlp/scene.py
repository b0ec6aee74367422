"""The physical setup shared by estimators, bounds and experiments."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Box, LedArray, LedTransmitter, ReceiverModel, as_vec3
from .radiometry import NoiseModel

ROOM = Box([-2.0, -2.0, 0.0], [2.0, 2.0, 3.0])
LED_GRID = [(-1, 1, 3), (0, 1, 3), (1, 1, 3),
            (-1, 0, 3), (0, 0, 3), (1, 0, 3),
            (-1, -1, 3), (0, -1, 3), (1, -1, 3)]


@dataclass(frozen=True)
class Scene:
    """LEDs (with their true decay rates), receiver, noise, true position and elapsed time."""

    leds: tuple
    receiver: ReceiverModel
    noise: NoiseModel
    true_position: np.ndarray
    t_hours: float

    def __post_init__(self):
        object.__setattr__(self, "leds", tuple(self.leds))
        object.__setattr__(self, "true_position", as_vec3(self.true_position, "true position"))
        if len(self.noise) != len(self.leds):
            raise ValueError(f"{len(self.noise)} noise variances for {len(self.leds)} LEDs")
        if not self.t_hours >= 0:
            raise ValueError(f"t_hours must be >= 0, got {self.t_hours}")

    @property
    def led_array(self) -> LedArray:
        return LedArray.from_leds(self.leds)

    @property
    def n_leds(self) -> int:
        return len(self.leds)

    def with_decay(self, rate: float) -> "Scene":
        return replace(self, leds=tuple(led.with_decay(rate) for led in self.leds))

    def with_sigma2(self, sigma2: float) -> "Scene":
        return replace(self, noise=NoiseModel.equal(sigma2, self.n_leds))

    def with_position(self, p) -> "Scene":
        return replace(self, true_position=as_vec3(p))

    def with_time(self, t_hours: float) -> "Scene":
        return replace(self, t_hours=float(t_hours))


def default_scene(sigma2: float = 1e-12, decay_rate: float = 1e-5, t_hours: float = 10000.0,
                  true_position=(0.5, 0.5, 0.85)) -> Scene:
    """4 x 4 x 3 m room, nine downward LEDs on a 1 m grid at the ceiling, upward receiver."""
    leds = tuple(LedTransmitter(np.array(p, dtype=float), np.array([0.0, 0.0, -1.0]),
                                1.0, 10.0, decay_rate) for p in LED_GRID)
    rx = ReceiverModel(np.array([0.0, 0.0, 1.0]), 1e-4, 1.0, ROOM)
    return Scene(leds, rx, NoiseModel.equal(sigma2, len(leds)), np.array(true_position, float),
                 t_hours)
