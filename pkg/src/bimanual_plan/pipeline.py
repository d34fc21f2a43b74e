"""End-to-end orchestration: trace -> graphs -> units -> primitives -> plan -> dry run."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .coordination import BimanualGraph, classify_series, diagnostics
from .dry_run import MockWorld, RunResult, check_relations, run_to_completion
from .plan import Plan, compile_plan, lint
from .scene_graphs import GraphBuilder
from .segmentation import InteractionUnit, Primitive, extract_primitives, report, segment
from .trace import Trace, normalize


@dataclass
class Analysis:
    trace: Trace
    config: RunConfig
    builder: GraphBuilder
    series: list[BimanualGraph]
    units: list[InteractionUnit]
    primitives: list[Primitive]

    @property
    def times(self) -> np.ndarray:
        return self.builder.tracks.times

    def labels(self) -> list[str | None]:
        """Per valid frame: the coordination label, or None when idle."""
        return [None if g.is_idle else g.c.describe().split("(dom")[0] for g in self.series]

    def report(self) -> dict:
        rep = report(self.units, self.primitives)
        rep["config_digest"] = self.config.digest()
        rep["trace"] = self.trace.source
        return rep

    def diagnostics(self) -> list[dict]:
        return [diagnostics(g) for g in self.series]


def prepare(trace: Trace, cfg: RunConfig) -> Trace:
    return trace if trace.normalized else normalize(trace, cfg.rate_hz, cfg.max_gap_s)


def analyze(trace: Trace, cfg: RunConfig | None = None) -> Analysis:
    cfg = cfg or RunConfig()
    trace = prepare(trace, cfg)
    builder = GraphBuilder(trace, cfg.detector())
    series = classify_series(builder.series, cfg.mi_tie_eps)
    frames = builder.tracks.frames
    units = segment(series, trace, cfg.theta_mi, cfg.mi_tie_eps, frame_of=lambda k: int(frames[k]),
                    min_frames=cfg.debounce_frames)
    prims = extract_primitives(units, cfg.d_oo_th, cfg.theta_mi, cfg.window_s)
    return Analysis(trace, cfg, builder, series, units, prims)


def build_plan(analysis: Analysis) -> Plan:
    cfg = analysis.config
    provenance = {"config": cfg.digest(), "trace": analysis.trace.source or "memory"}
    return compile_plan(analysis.primitives, {"Right": cfg.arm_right, "Left": cfg.arm_left}, provenance)


def dry_run(plan: Plan, scene: dict, cfg: RunConfig | None = None,
            pos_tol: float = 1e-6, rot_tol_rad: float = 1e-6) -> tuple[RunResult, list[dict]]:
    cfg = cfg or RunConfig()
    world = MockWorld.from_scene(scene, cfg)
    result = run_to_completion(plan, world, cfg.max_ticks)
    return result, check_relations(result.world, scene.get("expected", []), pos_tol, rot_tol_rad)


__all__ = ["Analysis", "analyze", "build_plan", "dry_run", "lint", "prepare"]
