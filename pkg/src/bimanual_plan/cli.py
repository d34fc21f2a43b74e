"""Command-line entry point: ``bimanual-plan {analyze,plan,dryrun,synth,metrics}``.

Exit codes: 0 success, 2 bad input or config, 3 plan compilation error,
4 dry-run failure.  Every command prints a JSON summary on stdout that
includes the resolved configuration, so a run can be repeated exactly.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

from . import synth
from .config import RunConfig
from .dry_run import MockWorld, check_relations, load_scene, run_to_completion
from .errors import (
    ConfigError, GraspOutOfReach, ParseError, PipelineError, SchemaViolation, TickBudgetExhausted,
)
from .infotheory import METRICS, metric_series
from .pipeline import analyze, build_plan, prepare
from .plan import lint, parse, serialize
from .scene_graphs import graph_to_dict
from .trace import ingest, write_csv

EXIT_OK, EXIT_INPUT, EXIT_COMPILE, EXIT_DRYRUN = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _config(args) -> RunConfig:
    try:
        return RunConfig.load(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, f"config: {exc}") from None


def _load_trace(path, cfg: RunConfig):
    try:
        return prepare(ingest(path), cfg)
    except PipelineError as exc:
        raise CliError(EXIT_INPUT, f"trace: {exc}") from None


def _emit(summary: dict, cfg: RunConfig) -> None:
    summary["config"] = cfg.to_dict()
    summary["config_digest"] = cfg.digest()
    print(json.dumps(summary, indent=2, sort_keys=True))


def _analysis(args, cfg):
    trace = _load_trace(args.trace, cfg)
    try:
        return analyze(trace, cfg)
    except PipelineError as exc:
        raise CliError(EXIT_INPUT, f"analysis failed: {exc}") from None


def cmd_analyze(args) -> int:
    cfg = _config(args)
    a = _analysis(args, cfg)
    out = Path(args.out)
    (out / "metrics").mkdir(parents=True, exist_ok=True)
    rep = a.report()
    (out / "report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    with (out / "diagnostics.jsonl").open("w") as fh:
        for d in a.diagnostics():
            fh.write(json.dumps(d, sort_keys=True) + "\n")
    with (out / "graphs.jsonl").open("w") as fh:
        for g in a.series:
            rec = {"Right": graph_to_dict(g.g_r), "Left": graph_to_dict(g.g_l)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    written = []
    names = sorted(a.trace.streams)
    for x, y in itertools.combinations(names, 2):
        for metric in ("MI", "Distance", "DistanceEntropy"):
            series = metric_series(a.trace, [x, y], metric, cfg.window_s, cfg.bins, cfg.aggregate,
                                   _resolution(cfg, metric))
            path = out / "metrics" / f"{x}__{y}__{metric}.csv"
            series.to_csv(path)
            written.append(str(path))
    (out / "config.toml").write_text(cfg.to_toml())
    _emit({"command": "analyze", "units": len(a.units), "primitives": len(a.primitives),
           "modes": [u.c.describe() for u in a.units], "out": str(out), "metric_files": len(written)}, cfg)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config(args)
    a = _analysis(args, cfg)
    try:
        plan = build_plan(a)
    except PipelineError as exc:
        raise CliError(EXIT_COMPILE, f"plan compilation failed: {type(exc).__name__}: {exc}") from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize(plan))
    report = lint(plan)
    _emit({"command": "plan", "out": str(out), "lint": report, "units": len(a.units)}, cfg)
    return EXIT_OK


def cmd_dryrun(args) -> int:
    cfg = _config(args)
    try:
        plan = parse(Path(args.plan).read_text())
    except FileNotFoundError:
        raise CliError(EXIT_INPUT, f"{args.plan}: no such file") from None
    except SchemaViolation as exc:
        raise CliError(EXIT_INPUT, f"{args.plan}: {exc}") from None
    try:
        scene = load_scene(args.scene)
        world = MockWorld.from_scene(scene, cfg)
    except (ParseError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"{args.scene}: bad scene: {exc}") from None
    pos_tol = cfg.at_target_pos_tol if args.pos_tol is None else args.pos_tol
    rot_tol = math.radians(cfg.at_target_rot_tol_deg if args.rot_tol_deg is None else args.rot_tol_deg)
    summary = {"command": "dryrun", "plan": args.plan, "scene": args.scene}
    code = EXIT_OK
    try:
        result = run_to_completion(plan, world, cfg.max_ticks)
        relations = check_relations(result.world, scene.get("expected", []), pos_tol, rot_tol)
        summary.update(status=result.status.value, ticks=result.ticks, relations=relations,
                       final_state=result.world.snapshot())
        passed = result.status.value == "Success" and all(r["pass"] for r in relations)
    except (GraspOutOfReach, TickBudgetExhausted) as exc:
        summary.update(status="Failure", error=type(exc).__name__, message=str(exc),
                       final_state=world.snapshot())
        passed = False
    except PipelineError as exc:
        raise CliError(EXIT_INPUT, f"dry run could not start: {exc}") from None
    summary["pass"] = passed
    if not passed:
        code = EXIT_DRYRUN
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _emit(summary, cfg)
    return code


def cmd_synth(args) -> int:
    cfg = _config(args)
    try:
        kind = synth.scenario_kind(args.scenario)
        trace, truth = synth.generate(synth.Scenario(kind, noise_pos=args.noise, noise_rot=args.noise_rot,
                                                     seed=args.seed))
    except (KeyError, ValueError) as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    write_csv(trace, args.out)
    if args.truth:
        Path(args.truth).write_text(truth.to_json())
    if args.scene:
        Path(args.scene).write_text(json.dumps(truth.scene, indent=2, sort_keys=True) + "\n")
    _emit({"command": "synth", "scenario": kind.value, "seed": args.seed, "noise": args.noise,
           "frames": len(trace), "out": args.out}, cfg)
    return EXIT_OK


def _resolution(cfg: RunConfig, metric: str) -> float:
    return cfg.entropy_resolution_m if metric == "DistanceEntropy" else cfg.resolution_m


def cmd_metrics(args) -> int:
    cfg = _config(args)
    trace = _load_trace(args.trace, cfg)
    try:
        series = metric_series(trace, args.elements, args.metric, cfg.window_s, cfg.bins, cfg.aggregate,
                               _resolution(cfg, args.metric))
    except (PipelineError, ValueError) as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    series.to_csv(args.out)
    _emit({"command": "metrics", "metric": args.metric, "elements": args.elements,
           "samples": len(series), "out": args.out}, cfg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bimanual-plan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="TOML key/value file overriding defaults")
        p.set_defaults(func=func)
        return p

    p = add("analyze", cmd_analyze, "segment a recording and export metric series")
    p.add_argument("trace")
    p.add_argument("--out", required=True, help="output directory")

    p = add("plan", cmd_plan, "compile a recording into a behavior-tree plan")
    p.add_argument("trace")
    p.add_argument("--out", "--plan-out", dest="out", required=True, help="plan XML path")

    p = add("dryrun", cmd_dryrun, "execute a plan against a mock world")
    p.add_argument("--plan", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", help="write the JSON report here as well")
    p.add_argument("--pos-tol", type=float, help="relation check tolerance in m")
    p.add_argument("--rot-tol-deg", type=float, help="relation check tolerance in degrees")

    p = add("synth", cmd_synth, "generate a synthetic demonstration")
    p.add_argument("--scenario", required=True, help=", ".join(sorted(synth.ALIASES)))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="position noise sigma in m")
    p.add_argument("--noise-rot", type=float, default=0.0, help="rotation noise sigma in rad")
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--truth", help="ground-truth JSON path")
    p.add_argument("--scene", help="dry-run scene JSON path")

    p = add("metrics", cmd_metrics, "export one metric series as t,value CSV")
    p.add_argument("trace")
    p.add_argument("--metric", choices=METRICS, required=True)
    p.add_argument("--elements", nargs="+", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"bimanual-plan {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
