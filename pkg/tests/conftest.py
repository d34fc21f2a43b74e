import functools

import numpy as np
import pytest

from bimanual_plan import synth
from bimanual_plan.pipeline import analyze, build_plan
from bimanual_plan.trace import ElementId, ElementKind, Stream, Trace


@functools.lru_cache(maxsize=None)
def scenario_run(name: str, noise: float = 0.0, seed: int = 0):
    """(trace, truth, analysis) for a synthetic scenario, cached across tests."""
    trace, truth = synth.generate(synth.Scenario(synth.scenario_kind(name), noise_pos=noise, seed=seed))
    return trace, truth, analyze(trace)


@functools.lru_cache(maxsize=None)
def scenario_plan(name: str, noise: float = 0.0, seed: int = 0):
    return build_plan(scenario_run(name, noise, seed)[2])


def make_trace(positions: dict, rate_hz: float = 30.0, quats: dict | None = None) -> Trace:
    """Normalized trace from per-element (n, 3) position arrays.

    Names starting with ``R``/``L`` followed by ``Hand`` become the hands.
    """
    n = len(next(iter(positions.values())))
    t = np.arange(n) / rate_hz
    elements, streams = {}, {}
    for name, pos in positions.items():
        kind = (ElementKind.HAND_RIGHT if name == "RightHand"
                else ElementKind.HAND_LEFT if name == "LeftHand" else ElementKind.OBJECT)
        elements[name] = ElementId(name, kind)
        q = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)) if quats is None or name not in quats else quats[name]
        streams[name] = Stream(t.copy(), np.asarray(pos, dtype=float), np.asarray(q, dtype=float))
    return Trace(elements, streams, rate_hz=rate_hz, source="fixture")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def primitive_rows(prims) -> list[list[str]]:
    """Primitives in the ground-truth row format: [c, action, hand, target]."""
    return [[p.c.describe(), p.action.value + ("(OO)" if p.relation == "OO" else ""), p.hand, "+".join(p.target)]
            for p in prims]


def truncate(trace: Trace, n: int) -> Trace:
    """First ``n`` grid samples of a normalized trace."""
    streams = {k: Stream(s.t[:n].copy(), s.pos[:n].copy(), s.quat[:n].copy()) for k, s in trace.streams.items()}
    return Trace(trace.elements, streams, rate_hz=trace.rate_hz, source=trace.source)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts at the end of the run, one line per criterion."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
