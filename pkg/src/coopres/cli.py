"""Command-line entry point: run / measure / grid / preset / validate."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .disruptions import EventKind
from .harness import (
    PRESETS,
    ConfigError,
    emit_report,
    export_indicators,
    parse_scenario_config,
    run_grid,
    run_scenario,
)
from .resilience import CurvePair, detect_triggers, resilience_pipeline
from .timeseries import TimeSeries

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

FORMATS = {"csv": ("report.csv", "csv"),
           "json": ("report.json", "json"),
           "svg": ("heatmap.svg", "svg_heatmap")}


class _Parser(argparse.ArgumentParser):
    # Argument problems are validation failures: report and exit 1.
    def error(self, message):
        print(f"error:cli: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coopres",
                     description="Cooperative-resilience measurement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[], help="run one scenario from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None,
                     help="override the config's base seed (default: keep config value)")
    run.add_argument("--format", default="csv,json,svg")
    run.add_argument("--traces", action="store_true",
                     help="also dump per-episode JSONL world traces")

    measure = sub.add_parser("measure",
                             help="score externally supplied performance/reference curves")
    measure.add_argument("--performance", required=True)
    measure.add_argument("--reference", required=True)
    measure.add_argument("--schedule", default=None,
                         help="trigger ticks, one per line (optional; detected from the "
                              "curves when omitted)")
    measure.add_argument("--out", required=True, help="output JSON file")
    measure.add_argument("--name", default="value", help="variable name in the report")

    grid = sub.add_parser("grid", help="run a named experiment grid")
    grid.add_argument("--preset", required=True, choices=sorted(PRESETS))
    grid.add_argument("--out", required=True)
    grid.add_argument("--seed", type=int, default=None)
    grid.add_argument("--format", default="csv,json,svg")

    preset = sub.add_parser("preset", help="list presets or show one")
    preset.add_argument("name", nargs="?", default=None)

    validate = sub.add_parser("validate", help="check a scenario config file")
    validate.add_argument("--config", required=True)
    return parser


def _parse_trigger_file(path: str) -> list[int]:
    """Trigger ticks, one per line; full schedule lines are also accepted."""
    triggers = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            triggers.append(int(parts[0]))
        else:
            triggers.append(int(parts[1]))
    return triggers


def _emit_all(result, out_dir: Path, formats: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in formats.split(","):
        name = name.strip()
        if name not in FORMATS:
            raise ConfigError(f"unknown format {name!r} (choose from csv, json, svg)")
        filename, kind = FORMATS[name]
        emit_report(result, kind, out_dir / filename)


def _cmd_run(args) -> int:
    config = parse_scenario_config(args.config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    config.validate()
    result = run_scenario(config)
    out_dir = Path(args.out)
    _emit_all(result, out_dir, args.format)
    export_indicators(result, out_dir)
    if args.traces:
        from .harness import run_episode
        from .world import write_trace_jsonl
        for k in range(config.episodes):
            seed = config.base_seed + k
            for label, with_events in (("performance", True), ("reference", False)):
                trace = run_episode(config, seed, with_events)
                write_trace_jsonl(trace, out_dir / f"trace_{label}_ep{k}.jsonl")
    print(f"J = {result.report.assembled:.6f} "
          f"(L={result.report.event_count}, K={result.report.variable_count})")
    return EXIT_OK


def _cmd_measure(args) -> int:
    performance = TimeSeries.from_csv(args.performance)
    reference = TimeSeries.from_csv(args.reference)
    pair = CurvePair(performance=performance, reference=reference)
    if args.schedule is not None:
        triggers = _parse_trigger_file(args.schedule)
    else:
        triggers = detect_triggers(pair)
        if not triggers:
            raise ValueError("no disruption detected in the curves and no schedule given")
    report = resilience_pipeline({args.name: pair}, triggers)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    report.to_json(out)
    print(f"J = {report.assembled:.6f} (L={report.event_count})")
    return EXIT_OK


def _cmd_grid(args) -> int:
    build = PRESETS[args.preset]
    grid = build()
    if args.seed is not None:
        grid.cells = {cell: replace(cfg, base_seed=args.seed)
                      for cell, cfg in grid.cells.items()}
    result = run_grid(grid)
    out_dir = Path(args.out)
    _emit_all(result, out_dir, args.format)
    for scenario in result.scenario_results():
        export_indicators(scenario, out_dir)
    for (r, c), res in sorted(result.results.items()):
        print(f"{res.scenario_id}: J = {res.report.assembled:.6f}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    if args.name is None:
        for name in sorted(PRESETS):
            grid = PRESETS[name]()
            print(f"{name}: {len(grid.cells)} scenarios "
                  f"({len(grid.row_labels)}x{len(grid.col_labels)})")
        return EXIT_OK
    if args.name not in PRESETS:
        raise ConfigError(f"unknown preset {args.name!r} (choose from {sorted(PRESETS)})")
    grid = PRESETS[args.name]()
    for (r, c), cfg in grid.sorted_cells():
        descr = []
        for event in cfg.schedule:
            if event.kind is EventKind.APPLE_VANISH:
                descr.append(f"apple_vanish@{event.trigger_tick} v_s={event.v_s}")
            else:
                descr.append(f"bots@{event.trigger_tick} x{event.bot_count} "
                             f"for {event.duration}")
        print(f"{cfg.scenario_id} [{grid.row_labels[r]} | {grid.col_labels[c]}]: "
              + "; ".join(descr))
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = parse_scenario_config(args.config)
    config.validate()
    print(f"{args.config}: ok ({config.n_agents} agents, "
          f"{len(config.schedule)} events, {config.episodes} episodes)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    handlers = {"run": _cmd_run, "measure": _cmd_measure, "grid": _cmd_grid,
                "preset": _cmd_preset, "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error:config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error:input: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - unexpected failures
        print(f"error:runtime: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
