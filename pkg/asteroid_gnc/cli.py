"""Command line entry point: run, compare, metrics, validate and presets."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import yaml

from .const import (
    COMPARE_FILE,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OUTPUT_DIR,
    ENV_LOG_LEVEL,
    ENV_OUTPUT_DIR,
    METRICS_FILE,
    MODES,
    SCENARIO_COPY_FILE,
)
from .constellation import EpochProgress, run_constellation
from .exceptions import GncError
from .metrics import MetricsReport, compute_metrics, metrics_from_frames
from .outputs import emit_outputs, read_outputs
from .scenario import Scenario, load_scenario, preset_names, preset_path

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
PROGRESS_EVERY = 100
NULLIFY_CHOICES = {"on": True, "off": False}


def resolve_scenario(name: str) -> Scenario:
    """A scenario file path, or the name of a bundled preset."""
    path = Path(name)
    if path.exists():
        return load_scenario(path)
    return load_scenario(preset_path(name))


def _csv_choices(choices: Sequence[str]) -> Callable[[str], list[str]]:
    def parse(value: str) -> list[str]:
        items = [item.strip() for item in value.split(",") if item.strip()]
        unknown = [item for item in items if item not in choices]
        if not items or unknown:
            raise argparse.ArgumentTypeError(f"expected a comma separated subset of {', '.join(choices)}")
        return items

    return parse


def _progress_logger(label: str) -> Callable[[EpochProgress], None]:
    def log_progress(progress: EpochProgress) -> None:
        if progress.epoch % PROGRESS_EVERY == 0 or progress.epoch == progress.epochs:
            _LOGGER.info("%s: epoch %d/%d (t = %.2f h)", label, progress.epoch, progress.epochs, progress.t / 3600.0)

    return log_progress


def _overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration_h is not None:
        overrides["duration_s"] = args.duration_h * 3600.0
    return overrides


def _run_and_emit(scenario: Scenario, out_dir: Path, label: str) -> MetricsReport:
    result = run_constellation(scenario, listener=_progress_logger(label))
    report = compute_metrics(result, scenario)
    emit_outputs(result, report, scenario, out_dir)
    return report


def cmd_run(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario)
    overrides = _overrides(args)
    if args.mode is not None:
        overrides["mode"] = args.mode
    if overrides:
        scenario = scenario.with_overrides(**overrides)
    report = _run_and_emit(scenario, Path(args.out), scenario.name)
    print(yaml.safe_dump(report.as_dict(), sort_keys=False), end="")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    base = resolve_scenario(args.scenario)
    if overrides := _overrides(args):
        base = base.with_overrides(**overrides)
    out_dir = Path(args.out)
    summary: dict[str, dict] = {}
    for mode in args.modes:
        for nullify in args.nullify or [None]:
            variant: dict = {"mode": mode}
            label = mode
            if nullify is not None:
                variant["nullify_out_of_plane"] = NULLIFY_CHOICES[nullify]
                label = f"{mode}_nullify-{nullify}"
            scenario = base.with_overrides(**variant)
            report = _run_and_emit(scenario, out_dir / label, label)
            summary[label] = {
                "seed": scenario.seed,
                "duration_h": report.duration_h,
                "delta_r_mean_m": report.delta_r_mean_m,
                "satellites": {
                    s.sat_id: {"delta_r_mean_m": s.delta_r_mean_m, "delta_r_max_m": s.delta_r_max_m, "fuel_kg": s.fuel_kg}
                    for s in report.satellites
                },
            }
    document = yaml.safe_dump(summary, sort_keys=False)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / COMPARE_FILE).write_text(document, encoding="utf-8")
    except OSError as err:
        raise GncError(f"Cannot write {out_dir / COMPARE_FILE}: {err}") from err
    for label, entry in summary.items():
        _LOGGER.info("%-28s mean ΔR %10.3f m", label, entry["delta_r_mean_m"])
    print(document, end="")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    history_dir = Path(args.history_dir)
    scenario = load_scenario(history_dir / SCENARIO_COPY_FILE)
    frames, fused = read_outputs(history_dir, scenario)
    report = metrics_from_frames(frames, fused, scenario)
    document = yaml.safe_dump(report.as_dict(), sort_keys=False)
    if args.write:
        (history_dir / METRICS_FILE).write_text(document, encoding="utf-8")
    print(document, end="")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario)
    schedule = scenario.mission.schedule
    print(
        f"{scenario.name}: {len(scenario.satellites)} satellite(s), {schedule.epochs} epochs, "
        f"{schedule.mode} mode, gravity degree {scenario.mission.asteroid.gravity.degree}, "
        f"{len(scenario.mission.catalog)} landmarks"
    )
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    for name in preset_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asteroid-gnc", description="Station-keeping GNC simulator for small bodies")
    parser.add_argument(
        "--log-level",
        default=os.environ.get(ENV_LOG_LEVEL, DEFAULT_LOG_LEVEL),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    default_out = os.environ.get(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR)

    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("scenario", help="scenario file or preset name")
    run.add_argument("--out", default=default_out)
    run.add_argument("--seed", type=int)
    run.add_argument("--duration-h", type=float, help="override the scenario duration")
    run.add_argument("--mode", choices=MODES)
    run.set_defaults(func=cmd_run)

    compare = sub.add_parser("compare", help="re-run a scenario under several modes with the same seed")
    compare.add_argument("scenario", help="scenario file or preset name")
    compare.add_argument("--modes", type=_csv_choices(MODES), default=list(MODES))
    compare.add_argument("--nullify", type=_csv_choices(tuple(NULLIFY_CHOICES)))
    compare.add_argument("--out", default=default_out)
    compare.add_argument("--seed", type=int)
    compare.add_argument("--duration-h", type=float, help="override the scenario duration")
    compare.set_defaults(func=cmd_compare)

    metrics = sub.add_parser("metrics", help="recompute metrics from a run's output directory")
    metrics.add_argument("history_dir")
    metrics.add_argument("--write", action="store_true", help=f"also rewrite {METRICS_FILE}")
    metrics.set_defaults(func=cmd_metrics)

    validate = sub.add_parser("validate", help="check a scenario without running it")
    validate.add_argument("scenario", help="scenario file or preset name")
    validate.set_defaults(func=cmd_validate)

    presets = sub.add_parser("presets", help="list bundled scenarios")
    presets.set_defaults(func=cmd_presets)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GncError, ValueError, OSError) as err:
        _LOGGER.error("%s failed: %s", args.command, err)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE
