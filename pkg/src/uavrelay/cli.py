"""Command-line entry point: ``uavrelay {run,sweep,rmse,preset}``.

Exit status: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from uavrelay import harness
from uavrelay.errors import ConfigError
from uavrelay.planner import ALGORITHMS
from uavrelay.scenario import ScenarioConfig, dump_config, from_dict, load_config, paper_preset, to_dict

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("uavrelay")

_SWEEP_KEYS = ("base", "algorithms", "comm_ranges_m", "seeds", "horizons")


class _StepFilter(logging.Filter):
    def filter(self, record):
        if not hasattr(record, "step"):
            record.step = "-"
        return True


def _configure_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("level=%(levelname)s step=%(step)s msg=%(message)s"))
    handler.addFilter(_StepFilter())
    root = logging.getLogger("uavrelay")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    algorithms: tuple[str, ...]
    comm_ranges_m: tuple[float, ...]
    seeds: tuple[int, ...]
    horizons: tuple[int, ...]

    def cells(self) -> list[ScenarioConfig]:
        return [
            self.base.replace(comm_range_m=R, seed=s, algorithm=a, horizon_steps=F)
            for R in self.comm_ranges_m
            for s in self.seeds
            for a in self.algorithms
            for F in self.horizons
        ]


def parse_sweep(data: dict) -> SweepSpec:
    if not isinstance(data, dict):
        raise ConfigError("must be a JSON object", "sweep")
    for k in data:
        if k not in _SWEEP_KEYS:
            raise ConfigError("unknown field", k)
    for k in _SWEEP_KEYS:
        if k not in data:
            raise ConfigError("missing field", k)
    base = from_dict(data["base"])
    lists = {}
    for k in _SWEEP_KEYS[1:]:
        v = data[k]
        if not isinstance(v, list) or not v:
            raise ConfigError("must be a non-empty list", k)
        lists[k] = tuple(v)
    for a in lists["algorithms"]:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}", "algorithms")
    for name in ("seeds", "horizons"):
        if any(isinstance(x, bool) or not isinstance(x, int) for x in lists[name]):
            raise ConfigError("must be integers", name)
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in lists["comm_ranges_m"]):
        raise ConfigError("must be numbers", "comm_ranges_m")
    spec = SweepSpec(
        base,
        lists["algorithms"],
        tuple(float(x) for x in lists["comm_ranges_m"]),
        lists["seeds"],
        lists["horizons"],
    )
    spec.cells()  # validates every combination up front
    return spec


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from None


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.seed_override is not None:
        changes["seed"] = args.seed_override
    if args.algorithm_override is not None:
        changes["algorithm"] = args.algorithm_override
    if changes:
        cfg = cfg.replace(**changes)
    scenario = harness.materialize(cfg)
    log.info("running %s F=%d seed=%d", cfg.planner.algorithm, cfg.planner.horizon_steps, cfg.seed)
    trace = harness.run(scenario, cfg.planner_config(), cfg.filter_config())
    harness.write_outputs(trace, args.out)
    log.info("wrote %s", Path(args.out) / "trace.csv")
    return EXIT_OK


AGGREGATE_COLUMNS = (
    "comm_range_m",
    "algorithm",
    "horizon_steps",
    "native_mode",
    "n",
    "connectivity_min_median",
    "connectivity_min_mean",
    "max_lifetime_min_median",
    "relative_connectivity_median",
    "relative_connectivity_q1",
    "relative_connectivity_q3",
    "paper_relative_target",
)


def aggregate_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for r in rows:
        target = r["paper_relative_target"]
        w.writerow(
            [
                format(r["comm_range_m"], ".9g"),
                r["algorithm"],
                r["horizon_steps"],
                r["native_mode"],
                r["connectivity_min"]["n"],
                format(r["connectivity_min"]["median"], ".9g"),
                format(r["connectivity_min"]["mean"], ".9g"),
                format(r["max_lifetime_min"]["median"], ".9g"),
                format(r["relative_connectivity"]["median"], ".9g"),
                format(r["relative_connectivity"]["q1"], ".9g"),
                format(r["relative_connectivity"]["q3"], ".9g"),
                "" if target is None else format(target, ".9g"),
            ]
        )
    return buf.getvalue()


def cmd_sweep(args) -> int:
    spec = parse_sweep(_read_json(args.config))
    cells = spec.cells()
    if args.jobs < 1:
        raise ConfigError("must be >= 1", "--jobs")
    log.info("sweep of %d cells with %d jobs", len(cells), args.jobs)
    metrics = harness.run_cells(cells, args.jobs)
    rows = harness.aggregate(metrics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = [m for m in metrics if "error" in m]
    result = {"schema_version": harness.SCHEMA_VERSION, "cells": metrics, "aggregate": rows}
    (out / "sweep.json").write_text(harness.dumps_json(result))
    (out / "aggregate.csv").write_text(aggregate_csv(rows))
    for m in failed:
        log.error("cell %s F=%s R=%s seed=%s failed: %s", m["algorithm"], m["horizon_steps"], m["comm_range_m"], m["seed"], m["error"])
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_rmse(args) -> int:
    cfg = load_config(args.config)
    if args.runs < 1:
        raise ConfigError("must be >= 1", "--runs")
    log.info("estimator study over %d runs", args.runs)
    study = harness.rmse_study(cfg, args.runs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "time_s", "rmse_position_m", "rmse_velocity_mps"])
    for k, (t, p, v) in enumerate(zip(study["time_s"], study["rmse_position_m"], study["rmse_velocity_mps"])):
        w.writerow([k, format(t, ".9g"), format(p, ".9g"), format(v, ".9g")])
    (out / "rmse.csv").write_text(buf.getvalue())
    summary = {
        "schema_version": harness.SCHEMA_VERSION,
        "runs": args.runs,
        "seed": cfg.seed,
        "steady_position_m": study["steady_position_m"],
        "steady_velocity_mps": study["steady_velocity_mps"],
    }
    (out / "rmse.json").write_text(harness.dumps_json(summary))
    return EXIT_OK


def cmd_preset(args) -> int:
    cfg = paper_preset(seed=args.seed, comm_range_m=args.comm_range)
    if args.algorithm:
        cfg = cfg.replace(algorithm=args.algorithm)
    text = dump_config(cfg)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavrelay", description="Relay UAV trajectory planning simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario; writes trace.csv and metrics.json")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed-override", type=int)
    r.add_argument("--algorithm-override", choices=ALGORITHMS)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="algorithms x ranges x seeds x horizons")
    s.add_argument("--config", required=True, help="sweep JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("rmse", help="Monte Carlo estimator RMSE curves")
    m.add_argument("--config", required=True)
    m.add_argument("--runs", type=int, default=100)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_rmse)

    q = sub.add_parser("preset", help="write the reference scenario config")
    q.add_argument("--out", default="-")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--comm-range", type=float, default=100_000.0)
    q.add_argument("--algorithm", choices=ALGORITHMS)
    q.set_defaults(func=cmd_preset)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit status
        log.error("runtime failure: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
