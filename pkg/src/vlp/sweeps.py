"""Monte Carlo RMSE sweeps against the matching bounds.

Trial ``k`` at sweep point ``j`` always draws its noise from
``rng_stream(master_seed, j, k)``, and every scenario at that point is fed the
same measurements.  Trials are processed in fixed blocks of ``BLOCK`` so the
numbers do not depend on how many workers share the work.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .config import ExperimentConfig
from .errors import GeometryError, SingularityError
from .estimators import Scenario, SearchGrid, SearchOptions, estimate_batch
from .radiometry import noiseless_received, simulate_batch
from .scene import Scene

log = logging.getLogger(__name__)

BLOCK = 50
BOUND_KINDS = {1: ("lb", "mcrb"), 2: ("crb",), 3: ("crb",)}


@dataclass
class SweepRow:
    sweep_value: float
    scenario: int
    rmse: float  # m, nan if no trial succeeded
    bounds: dict = field(default_factory=dict)  # kind -> sqrt(trace), m
    trials_used: int = 0
    failed: bool = False
    sigma2: float = float("nan")
    t_hours: float = float("nan")
    errors: list = field(default_factory=list)


_GRID_CACHE: dict = {}


def _grid_for(scene: Scene, options: SearchOptions) -> SearchGrid:
    rx = scene.receiver
    key = (scene.led_array.positions.tobytes(), scene.led_array.orientations.tobytes(),
           scene.led_array.orders.tobytes(), rx.orientation.tobytes(), rx.pd_area,
           rx.region.lo.tobytes(), rx.region.hi.tobytes(), options.grid_shape)
    grid = _GRID_CACHE.get(key)
    if grid is None:
        if len(_GRID_CACHE) > 8:
            _GRID_CACHE.clear()
        grid = _GRID_CACHE[key] = SearchGrid(scene.led_array, rx, rx.region, options.grid_shape)
    return grid


def _estimate_block(args):
    """Squared errors (nan on failure) for one block of trials, every scenario."""
    scene, scenarios, options, master_seed, point, trials = args
    grid = _grid_for(scene, options)
    mean = noiseless_received(scene.led_array, scene.receiver, scene.true_position, scene.t_hours)
    P = simulate_batch(mean, scene.noise, [(master_seed, point, k) for k in trials])
    out = {}
    for s in scenarios:
        sq = np.full(len(trials), np.nan)
        msgs = []
        try:
            res = estimate_batch(s, P, scene.t_hours, scene.led_array, scene.receiver,
                                 scene.noise, grid, options)
            for i, r in enumerate(res):
                sq[i] = np.sum((r.position - scene.true_position) ** 2)
        except (GeometryError, SingularityError, ValueError, FloatingPointError) as exc:
            # retry row by row so one bad trial does not sink the block
            for i, row in enumerate(P):
                try:
                    r = estimate_batch(s, row, scene.t_hours, scene.led_array, scene.receiver,
                                       scene.noise, grid, options)[0]
                    sq[i] = np.sum((r.position - scene.true_position) ** 2)
                except (GeometryError, SingularityError, ValueError, FloatingPointError) as e:
                    msgs.append(f"trial {trials[i]}: {e}")
            msgs = msgs or [str(exc)]
        out[s] = (sq, msgs)
    return out


def _scenario_bounds(scene: Scene, scenario: int) -> tuple[dict, list]:
    try:
        if scenario == 1:
            rep = bounds.mcrb(scene)
            return {"lb": float(np.sqrt(np.trace(rep.lb))),
                    "mcrb": float(np.sqrt(np.trace(rep.mcrb)))}, []
        if scenario == 2:
            alpha = scene.leds[0].decay_rate
            return {"crb": float(np.sqrt(bounds.crb_scenario2(scene, scene.true_position, alpha)))}, []
        return {"crb": float(np.sqrt(bounds.crb_scenario3(scene, scene.true_position)))}, []
    except (SingularityError, GeometryError, ValueError) as exc:
        return {k: float("nan") for k in BOUND_KINDS[scenario]}, [f"bound: {exc}"]


def run_point(scene: Scene, cfg: ExperimentConfig, point: int, sweep_value: float,
              executor=None) -> list[SweepRow]:
    """All scenarios at one sweep point; ``point`` keys the trial seeds."""
    blocks = [list(range(a, min(a + BLOCK, cfg.trials))) for a in range(0, cfg.trials, BLOCK)]
    jobs = [(scene, cfg.scenarios, cfg.search, cfg.master_seed, point, b) for b in blocks]
    parts = list(executor.map(_estimate_block, jobs)) if executor else [
        _estimate_block(j) for j in jobs]
    rows = []
    for s in cfg.scenarios:
        sq = np.concatenate([p[s][0] for p in parts])
        errors = [m for p in parts for m in p[s][1]]
        ok = np.isfinite(sq)
        bnd, berr = _scenario_bounds(scene, s)
        rows.append(SweepRow(
            sweep_value=float(sweep_value), scenario=int(s),
            rmse=float(np.sqrt(sq[ok].mean())) if ok.any() else float("nan"),
            bounds=bnd, trials_used=int(ok.sum()), failed=bool(errors or berr),
            sigma2=float(scene.noise.variances[0]), t_hours=scene.t_hours,
            errors=errors + berr))
        if errors or berr:
            log.warning("point %d scenario %d: %d failures, e.g. %s", point, s,
                        len(errors) + len(berr), (errors + berr)[0])
    return rows


def _executor(cfg: ExperimentConfig):
    return ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None


def _run(points, cfg: ExperimentConfig) -> list[SweepRow]:
    ex = _executor(cfg)
    try:
        rows = []
        for j, (scene, value) in enumerate(points):
            log.info("sweep point %d/%d (value %g)", j + 1, len(points), value)
            rows.extend(run_point(scene, cfg, j, value, ex))
        return rows
    finally:
        if ex is not None:
            ex.shutdown()


def run_noise_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    sweep = cfg.sweep("noise")
    return _run([(cfg.scene.with_sigma2(s2), s2) for s2 in sweep.sigma2_w2], cfg)


def run_alpha_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    sweep = cfg.sweep("alpha")
    points = [(cfg.scene.with_sigma2(s2).with_decay(a), a)
              for s2 in sweep.sigma2_w2 for a in sweep.decay_rates_per_hour]
    return _run(points, cfg)


def run_path_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """Sweep value is the horizontal distance of each waypoint from the room's vertical axis."""
    sweep = cfg.sweep("path")
    region = cfg.scene.receiver.region
    centre = 0.5 * (region.lo + region.hi)
    points = []
    for s2 in sweep.sigma2_w2:
        for p in sweep.waypoints():
            points.append((cfg.scene.with_sigma2(s2).with_position(p),
                           float(np.hypot(*(p - centre)[:2]))))
    return _run(points, cfg)


SWEEPS = {"noise": run_noise_sweep, "alpha": run_alpha_sweep, "path": run_path_sweep}


def rmse_table(rows, sigma2=None) -> dict:
    """``{scenario: (sweep_values, rmse)}`` convenience view, optionally for one noise level."""
    out = {}
    for r in rows:
        if sigma2 is not None and not np.isclose(r.sigma2, sigma2, rtol=1e-12, atol=0):
            continue
        xs, ys = out.setdefault(r.scenario, ([], []))
        xs.append(r.sweep_value)
        ys.append(r.rmse)
    return {s: (np.array(x), np.array(y)) for s, (x, y) in out.items()}
