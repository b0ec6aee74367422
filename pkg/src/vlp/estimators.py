"""Position estimators for the three levels of decay knowledge.

* ``Scenario.MISMATCH``: the receiver ignores decay and uses the initial LED
  powers (mismatched ML).
* ``Scenario.MODEL_ONLY``: exponential decay with one unknown common rate; the
  rate is profiled out in closed form so the search stays three-dimensional.
* ``Scenario.FULL``: decay rates known.

All three minimise a weighted least-squares cost over the receiver region with
the same engine: a coarse lexicographic grid followed by bounded Nelder-Mead
from the best grid point.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, GeometryError
from .geometry import Box, LedArray, ReceiverModel, as_vec3, lambertian_gain
from .radiometry import MeasurementSet, NoiseModel


class Scenario(enum.IntEnum):
    MISMATCH = 1
    MODEL_ONLY = 2
    FULL = 3


@dataclass(frozen=True)
class ScenarioKnowledge:
    tag: Scenario
    assumed_decay: float | None = None  # overrides the LEDs' rates in FULL

    def __post_init__(self):
        object.__setattr__(self, "tag", Scenario(self.tag))


@dataclass(frozen=True)
class SearchOptions:
    grid_shape: tuple = (41, 41, 31)
    xtol: float = 1e-5  # m, simplex size at which refinement stops
    max_iter: int = 200

    def __post_init__(self):
        shape = tuple(int(n) for n in self.grid_shape)
        if len(shape) != 3 or min(shape) < 2:
            raise ConfigError(f"grid shape needs three axes of >= 2 points, got {self.grid_shape}")
        if not self.xtol > 0 or self.max_iter < 1:
            raise ConfigError("xtol must be > 0 and max_iter >= 1")
        object.__setattr__(self, "grid_shape", shape)


@dataclass(frozen=True)
class SearchStats:
    grid_points: int
    refine_iterations: int


@dataclass(frozen=True)
class EstimateResult:
    position: np.ndarray
    objective_value: float
    search_stats: SearchStats
    decay_rate_hat: float | None = None
    scenario: Scenario | None = field(default=None, compare=False)


class SearchGrid:
    """Channel gains of every LED precomputed at the coarse grid over ``box``.

    Points are stored in lexicographic (x, y, z) order, so ``argmin`` breaks
    ties toward the smallest point.  Points where some gain is undefined are
    dropped.
    """

    def __init__(self, leds, rx: ReceiverModel, box: Box, shape=(41, 41, 31)):
        leds = leds if isinstance(leds, LedArray) else LedArray.from_leds(leds)
        axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in zip(box.lo, box.hi, shape)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        gains = lambertian_gain(leds, rx, pts)
        ok = np.all(np.isfinite(gains), axis=1)
        if not ok.any():
            raise ConfigError(f"no admissible grid point in box {box}")
        self.leds = leds
        self.rx = rx
        self.box = box
        self.shape = tuple(int(n) for n in shape)
        self.spacing = (box.hi - box.lo) / (np.array(self.shape) - 1)
        self.points = pts[ok]
        self.gains = gains[ok]

    def __len__(self):
        return len(self.points)


def _model_amplitudes(scenario: Scenario, leds: LedArray, rx: ReceiverModel, t_hours: float,
                      decay_rates=None) -> np.ndarray:
    """Per-LED factor multiplying h_i in the assumed mean power (before any profiling)."""
    base = rx.responsivity * leds.initial_powers
    if scenario == Scenario.FULL:
        rates = leds.decay_rates if decay_rates is None else np.broadcast_to(
            np.asarray(decay_rates, float), base.shape)
        return base * np.exp(-rates * t_hours)
    return base


def profile_scale(powers, amp_h, weights):
    """Closed-form optimal decay factor ``exp(-alpha t)`` given undecayed mean powers.

    ``g`` is the unconstrained least-squares scale; it is used when
    ``0 < g < 1`` and replaced by 1 (zero decay) otherwise.  Broadcasts over
    leading axes; returns ``(scale, g)``.
    """
    num = np.sum(powers * amp_h * weights, axis=-1)
    den = np.sum(amp_h**2 * weights, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = num / den
    scale = np.where((g > 0) & (g < 1), g, 1.0)
    return scale, g


def alpha_profile(l_R, meas: MeasurementSet, leds, rx: ReceiverModel, noise: NoiseModel) -> float:
    """Decay rate maximising the joint likelihood at a fixed receiver position."""
    t = meas.elapsed_hours
    if t <= 0:
        raise GeometryError("decay rate is unidentifiable at t = 0")
    leds = leds if isinstance(leds, LedArray) else LedArray.from_leds(leds)
    h = lambertian_gain(leds, rx, as_vec3(l_R, "position"))
    if not np.all(np.isfinite(h)) or not np.any(h != 0):
        raise GeometryError(f"all channel gains vanish or are undefined at {l_R}")
    amp_h = rx.responsivity * leds.initial_powers * h
    _, g = profile_scale(meas.powers, amp_h, 1.0 / noise.variances)
    if 0 < g < 1:
        return float(-np.log(g) / t)
    return 0.0


def scenario_objective(scenario: Scenario, l_R, powers, leds: LedArray, rx: ReceiverModel,
                       noise: NoiseModel, t_hours: float, decay_rates=None):
    """Negative log-likelihood (up to constants) at one position; returns ``(value, alpha_hat)``.

    ``alpha_hat`` is None except for ``Scenario.MODEL_ONLY``.  Undefined
    geometry gives ``inf``.
    """
    h = lambertian_gain(leds, rx, np.asarray(l_R, float))
    if not np.all(np.isfinite(h)):
        return np.inf, None
    w = 1.0 / noise.variances
    amp_h = _model_amplitudes(scenario, leds, rx, t_hours, decay_rates) * h
    alpha = None
    if scenario == Scenario.MODEL_ONLY:
        if not np.sum(amp_h**2 * w) > 0:
            return np.inf, None
        scale, _ = profile_scale(powers, amp_h, w)
        amp_h = scale * amp_h
        alpha = float(-np.log(scale) / t_hours)
    r = powers - amp_h
    return float(0.5 * np.sum(w * r * r)), alpha


def grid_objectives(scenario: Scenario, powers: np.ndarray, grid: SearchGrid, noise: NoiseModel,
                    t_hours: float, decay_rates=None) -> np.ndarray:
    """Objective of every measurement row at every grid point, shape (K, G)."""
    P = np.atleast_2d(powers)
    w = 1.0 / noise.variances
    A = grid.gains * _model_amplitudes(scenario, grid.leds, grid.rx, t_hours, decay_rates)
    PP = (P * P) @ w
    PA = (P * w) @ A.T
    AA = (A * A) @ w
    if scenario == Scenario.MODEL_ONLY:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = PA / AA
        s = np.where((g > 0) & (g < 1), g, 1.0)
        obj = 0.5 * (PP[:, None] - 2 * s * PA + s * s * AA)
        obj[:, ~(AA > 0)] = np.inf
    else:
        obj = 0.5 * (PP[:, None] - 2 * PA + AA)
    return obj


def refine(fun, x0, box: Box, spacing, xtol: float, max_iter: int):
    """Bounded Nelder-Mead from ``x0``; never returns a point worse than ``x0``.

    Returns ``(x, f, iterations)``.
    """
    x0 = np.asarray(x0, float)
    f0 = fun(x0)
    simplex = [x0]
    for k in range(3):
        step = 0.5 * spacing[k]
        x = x0.copy()
        x[k] = x0[k] + step if x0[k] + step <= box.hi[k] else x0[k] - step
        simplex.append(x)
    res = minimize(fun, x0, method="Nelder-Mead", bounds=box.bounds,
                   options={"xatol": xtol, "fatol": np.inf, "maxiter": max_iter,
                            "initial_simplex": np.array(simplex)})
    if not res.fun <= f0:
        return x0, f0, int(res.nit)
    return np.clip(res.x, box.lo, box.hi), float(res.fun), int(res.nit)


def _check_inputs(meas: MeasurementSet, leds: LedArray, noise: NoiseModel):
    if meas.led_count != len(leds) or len(noise) != len(leds):
        raise ConfigError(f"{meas.led_count} measurements, {len(leds)} LEDs, "
                          f"{len(noise)} noise variances")


def _same_geometry(a: LedArray, b: LedArray) -> bool:
    return (len(a) == len(b) and np.array_equal(a.positions, b.positions)
            and np.array_equal(a.orientations, b.orientations) and np.array_equal(a.orders, b.orders))


def estimate_batch(scenario, powers, t_hours: float, leds, rx: ReceiverModel, noise: NoiseModel,
                   grid: SearchGrid | None = None, options: SearchOptions | None = None,
                   decay_rates=None, box: Box | None = None) -> list[EstimateResult]:
    """Estimate the receiver position for every row of ``powers``.

    The grid stage is shared across rows (one matrix product); each row is then
    refined on its own, so row k's result does not depend on the other rows.
    """
    scenario = Scenario(scenario)
    options = options or SearchOptions()
    leds = leds if isinstance(leds, LedArray) else LedArray.from_leds(leds)
    if scenario == Scenario.MODEL_ONLY and t_hours <= 0:
        raise GeometryError("decay rate is unidentifiable at t = 0")
    if grid is None:
        grid = SearchGrid(leds, rx, box or rx.region, options.grid_shape)
    elif not _same_geometry(grid.leds, leds):
        raise ConfigError("search grid was built for a different LED layout")
    if scenario == Scenario.FULL and decay_rates is None:
        decay_rates = leds.decay_rates  # the grid's own LEDs may carry other rates
    P = np.atleast_2d(np.asarray(powers, float))
    if P.shape[1] != len(leds) or len(noise) != len(leds):
        raise ConfigError(f"{P.shape[1]} measurements, {len(leds)} LEDs, "
                          f"{len(noise)} noise variances")

    results = []
    chunk = max(1, int(2e7 // max(len(grid), 1)))
    for start in range(0, len(P), chunk):
        block = P[start:start + chunk]
        obj = grid_objectives(scenario, block, grid, noise, t_hours, decay_rates)
        best = np.argmin(obj, axis=1)
        for row, idx in zip(block, best):
            def fun(x, row=row):
                return scenario_objective(scenario, x, row, leds, rx, noise, t_hours,
                                          decay_rates)[0]
            x, f, nit = refine(fun, grid.points[idx], grid.box, grid.spacing,
                               options.xtol, options.max_iter)
            alpha = None
            if scenario == Scenario.MODEL_ONLY:
                alpha = scenario_objective(scenario, x, row, leds, rx, noise, t_hours)[1]
            results.append(EstimateResult(x, f, SearchStats(len(grid), nit), alpha, scenario))
    return results


def _single(scenario, meas, leds, rx, noise, grid, options, decay_rates=None):
    leds = leds if isinstance(leds, LedArray) else LedArray.from_leds(leds)
    _check_inputs(meas, leds, noise)
    return estimate_batch(scenario, meas.powers[None, :], meas.elapsed_hours, leds, rx, noise,
                          grid, options, decay_rates)[0]


def mml_estimate(meas: MeasurementSet, leds, rx: ReceiverModel, noise: NoiseModel, *,
                 grid: SearchGrid | None = None,
                 options: SearchOptions | None = None) -> EstimateResult:
    """Mismatched ML: least squares with undecayed LED powers."""
    return _single(Scenario.MISMATCH, meas, leds, rx, noise, grid, options)


def ml_estimate_joint(meas: MeasurementSet, leds, rx: ReceiverModel, noise: NoiseModel, *,
                      grid: SearchGrid | None = None,
                      options: SearchOptions | None = None) -> EstimateResult:
    """Joint position / common decay-rate ML with the rate profiled out."""
    return _single(Scenario.MODEL_ONLY, meas, leds, rx, noise, grid, options)


def ml_estimate_full(meas: MeasurementSet, leds, rx: ReceiverModel, noise: NoiseModel, *,
                     grid: SearchGrid | None = None, options: SearchOptions | None = None,
                     knowledge: ScenarioKnowledge | None = None) -> EstimateResult:
    """ML with known decay rates (the LEDs' own, or ``knowledge.assumed_decay`` for all)."""
    rates = None
    if knowledge is not None and knowledge.assumed_decay is not None:
        rates = knowledge.assumed_decay
    return _single(Scenario.FULL, meas, leds, rx, noise, grid, options, rates)


ESTIMATORS = {
    Scenario.MISMATCH: mml_estimate,
    Scenario.MODEL_ONLY: ml_estimate_joint,
    Scenario.FULL: ml_estimate_full,
}
