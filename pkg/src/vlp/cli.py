"""``vlp`` command line: bounds, sweeps and one-shot estimation.

Exit codes: 0 success, 2 configuration / input error, 3 numerical singularity.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .bounds import bound_report
from .config import SWEEP_KINDS, load_config
from .errors import ConfigError, GeometryError, SingularityError
from .estimators import Scenario, estimate_batch
from .outputs import emit_outputs, ensure_writable
from .radiometry import MeasurementSet
from .sweeps import SWEEPS

EXIT_CONFIG = 2
EXIT_SINGULAR = 3


def read_measurements(path, n_leds: int, t_hours: float) -> MeasurementSet:
    """Read a ``led_index,power_w`` CSV (0-based indices, every LED exactly once)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"led_index", "power_w"} <= set(reader.fieldnames):
                raise ConfigError(f"{path}: expected columns led_index,power_w")
            pairs = [(int(r["led_index"]), float(r["power_w"])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read measurements {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: bad value: {exc}") from None
    idx = sorted(i for i, _ in pairs)
    if idx != list(range(n_leds)):
        raise ConfigError(f"{path}: need exactly one row per LED index 0..{n_leds - 1}")
    powers = np.empty(n_leds)
    for i, p in pairs:
        powers[i] = p
    return MeasurementSet(powers, t_hours, n_leds)


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


def cmd_bounds(args) -> int:
    cfg = _load(args)
    scenarios = [args.scenario] if args.scenario else cfg.scenarios
    reports = [bound_report(cfg.scene, s).to_dict() for s in scenarios]
    json.dump(reports[0] if args.scenario else reports, sys.stdout, indent=2)
    print()
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.trials is not None:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    if args.workers is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    cfg.sweep(args.kind)  # fail on a missing sweep before touching the disk
    out = args.out or cfg.outputs
    ensure_writable(out)
    t0 = time.perf_counter()
    rows = SWEEPS[args.kind](cfg)
    files = emit_outputs(rows, cfg, args.kind, out, time.perf_counter() - t0,
                         plots=not args.no_plots)
    for f in files:
        print(f)
    return 0


def cmd_estimate(args) -> int:
    cfg = _load(args)
    scene = cfg.scene
    meas = read_measurements(args.measurements, scene.n_leds, scene.t_hours)
    scenarios = [args.scenario] if args.scenario else cfg.scenarios
    out = []
    for s in scenarios:
        r = estimate_batch(Scenario(s), meas.powers, meas.elapsed_hours, scene.led_array,
                           scene.receiver, scene.noise, options=cfg.search)[0]
        out.append({"scenario": int(s), "position_m": r.position.tolist(),
                    "decay_rate_hat_per_hour": r.decay_rate_hat,
                    "objective_value": r.objective_value,
                    "grid_points": r.search_stats.grid_points,
                    "refine_iterations": r.search_stats.refine_iterations})
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment config JSON")
        sp.add_argument("--seed", type=int, default=None, help="override master_seed")

    b = sub.add_parser("bounds", help="print bounds at the configured true position as JSON")
    common(b)
    b.add_argument("--scenario", type=int, choices=[1, 2, 3])
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", help="run a Monte Carlo sweep and write CSV/SVG/manifest")
    common(s)
    s.add_argument("--kind", required=True, choices=SWEEP_KINDS)
    s.add_argument("--out", default=None, help="output directory (default: config 'outputs')")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("estimate", help="estimate the position from a measurement CSV")
    common(e)
    e.add_argument("--measurements", required=True, help="CSV with columns led_index,power_w")
    e.add_argument("--scenario", type=int, choices=[1, 2, 3])
    e.set_defaults(func=cmd_estimate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SingularityError as exc:
        print(f"vlp: singular: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ConfigError, GeometryError) as exc:
        print(f"vlp: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"vlp: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
