"""Interaction units, representative graphs, graph differences and primitive extraction."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .coordination import BimanualGraph, CoordinationMode, ModeKind, classify, merge
from .errors import OrphanOO
from .scene_graphs import Edge, SceneGraph, make_graph
from .transforms import RigidTransform

HANDS = ("Right", "Left")


class Action(str, Enum):
    MOVE = "Move"
    GRASP = "Grasp"
    RELEASE = "Release"
    KEEP_GRASP = "KeepGrasp"
    PLACEHOLDER = "MotionPrimitivePlaceholder"


@dataclass(frozen=True)
class HandStats:
    """Motion summary of one hand's manipulated node inside a unit."""

    max_deviation: float = 0.0  # largest distance from the unit-start position (m)
    net_displacement: float = 0.0
    duration_s: float = 0.0
    mean_mi: float = 0.0


@dataclass(frozen=True)
class InteractionUnit:
    index: int
    start: int  # first valid-frame index (inclusive)
    stop: int  # last valid-frame index (inclusive)
    t_start: float
    t_end: float
    c: CoordinationMode
    signature: frozenset
    g_repr: BimanualGraph
    after_gap: bool = False  # preceded by idle frames or the trace start
    before_gap: bool = False  # followed by idle frames or the trace end
    at_end: bool = False  # still active on the last frame of the trace
    stats: dict = field(default_factory=dict, compare=False)  # hand -> HandStats

    @property
    def n_frames(self) -> int:
        return self.stop - self.start + 1


@dataclass(frozen=True)
class GraphDiff:
    added: dict  # edge key -> Edge
    removed: dict

    @property
    def is_empty(self) -> bool:
        return not self.added and not self.removed


@dataclass(frozen=True)
class Primitive:
    c: CoordinationMode
    action: Action
    hand: str  # Right, Left or Both
    target: tuple = ()  # node key acted upon (o_m for HO moves/grasps, o_bkg for OO moves)
    transform: RigidTransform | None = None
    moved: tuple = ()  # for OO moves: the manipulated node key
    grasp_offsets: tuple = ()  # ((hand, T^{o_m}_h), ...) for two-handed moves
    role: str = ""  # dom/ref in Sequential units
    relation: str = ""  # HO or OO for moves
    index: int = -1

    def describe(self) -> str:
        tag = "(OO)" if self.relation == "OO" else ""
        return f"{self.action.value}{tag}_{self.hand}"

    def to_dict(self) -> dict:
        d = {
            "index": self.index,
            "c": self.c.to_dict(),
            "a": self.action.value,
            "m": self.hand,
            "target": list(self.target),
        }
        if self.relation:
            d["relation"] = self.relation
        if self.moved:
            d["moved"] = list(self.moved)
        if self.transform is not None:
            d["transform"] = [round(v, 9) for v in self.transform.as_tuple7()]
        if self.grasp_offsets:
            d["grasp_offsets"] = {h: [round(v, 9) for v in t.as_tuple7()] for h, t in self.grasp_offsets}
        if self.role:
            d["role"] = self.role
        return d


EMPTY = None  # virtual empty representative graph


def signature(g_b: BimanualGraph) -> frozenset:
    return g_b.edge_keys()


def signature_labels(sig: frozenset) -> list[str]:
    def label(key):
        return key[0] if len(key) == 1 else "{" + "+".join(key) + "}"
    return sorted(f"{label(t)}->{label(h)}:{r}" for t, h, r in sig)


def segment(series: list[BimanualGraph], trace=None, theta_mi: float = 0.25,
            tie_eps: float = 0.01, frame_of=None, min_frames: int = 1) -> list[InteractionUnit]:
    """Split a classified graph series into interaction units.

    A unit ends at idle frames, at a change of edge structure, or at a change
    of coordination mode (kind and, for one-arm, the active hand).  Units
    shorter than ``min_frames`` are transients between two stable states (one
    hand letting go a frame before the other) and are dropped, so the
    transition runs between their neighbours.  When a normalized ``trace`` is
    given, per-hand motion statistics are recorded for the primitive
    heuristics; ``frame_of`` maps series indices to grid indices.
    """
    bounds = []
    start = None
    for k, g in enumerate(series):
        if g.is_idle:
            if start is not None:
                bounds.append((start, k - 1))
                start = None
            continue
        if start is None:
            start = k
        elif signature(g) != signature(series[k - 1]) or g.c.key != series[k - 1].c.key:
            bounds.append((start, k - 1))
            start = k
    if start is not None:
        bounds.append((start, len(series) - 1))
    stable = [(a, b) for a, b in bounds if b - a + 1 >= min_frames]
    bounds = stable if stable else bounds

    def idle_between(lo, hi):
        return any(series[k].is_idle for k in range(lo, hi))

    units = []
    for idx, (a, b) in enumerate(bounds):
        after_gap = idx == 0 or idle_between(bounds[idx - 1][1] + 1, a)
        before_gap = idx == len(bounds) - 1 or idle_between(b + 1, bounds[idx + 1][0])
        g_repr = _representative(series, a, b, theta_mi, tie_eps)
        stats = _stats(series, a, b, trace, frame_of) if trace is not None else {}
        units.append(InteractionUnit(idx, a, b, series[a].frame_t, series[b].frame_t, g_repr.c,
                                     signature(series[a]), g_repr, after_gap, before_gap,
                                     b == len(series) - 1, stats))
    return units


def _stats(series, a, b, trace, frame_of):
    frame_of = frame_of or (lambda k: k)
    out = {}
    for hand in HANDS:
        g0 = series[a].hand(hand)
        if g0.is_empty:
            continue
        anchor = g0.manipulated.anchor
        pos = trace.positions(anchor)[frame_of(a):frame_of(b) + 1]
        dev = np.linalg.norm(pos - pos[0], axis=1)
        mis = [series[k].hand(hand).ho_edge.mi_bits for k in range(a, b + 1)]
        out[hand] = HandStats(float(dev.max()), float(dev[-1]), series[b].frame_t - series[a].frame_t,
                              float(np.mean(mis)))
    return out


def _representative(series, a, b, theta_mi, tie_eps) -> BimanualGraph:
    last = series[b]
    hands = {}
    for hand in HANDS:
        g_last = last.hand(hand)
        if g_last.is_empty:
            hands[hand] = SceneGraph.empty(hand, last.frame_t, last.frame)
            continue
        frames = [series[k].hand(hand) for k in range(a, b + 1)]
        # peak information sharing over the unit drives dominance
        mi = float(max(g.ho_edge.mi_bits for g in frames))
        onset = next((g for g in frames if g.ho_edge.mi_bits > theta_mi), frames[0])
        ho = g_last.ho_edge
        oo = g_last.oo_edge
        hands[hand] = make_graph(
            hand, ho.tail.anchor, last.frame_t, g_last.manipulated.elements, mi,
            onset.ho_edge.rel_pose,
            oo.tip.anchor if oo else None, oo.rel_pose if oo else None, last.frame,
        )
    g_b = merge(hands["Right"], hands["Left"])
    return g_b.with_mode(classify(g_b, tie_eps))


def representative(unit: InteractionUnit, series=None, theta_mi: float = 0.25,
                   tie_eps: float = 0.01) -> BimanualGraph:
    """Representative graph of a unit (recomputed from ``series`` when given)."""
    if series is None:
        return unit.g_repr
    return _representative(series, unit.start, unit.stop, theta_mi, tie_eps)


def _edge_map(g: BimanualGraph | None) -> dict:
    if g is None:
        return {}
    return {k: es[0] for k, es in g.edges.items()}


def diff(g_next: BimanualGraph | None, g_prev: BimanualGraph | None) -> GraphDiff:
    """Signed edge difference ``next - prev`` under the edge key; ``None`` is the empty graph."""
    nxt, prv = _edge_map(g_next), _edge_map(g_prev)
    added = {k: e for k, e in nxt.items() if k not in prv}
    removed = {k: e for k, e in prv.items() if k not in nxt}
    return GraphDiff(added, removed)


@dataclass(frozen=True)
class Transition:
    prev: InteractionUnit | None
    next: InteractionUnit | None
    diff: GraphDiff


def transitions(units: list[InteractionUnit]) -> list[Transition]:
    """Graph differences between consecutive units, with idle gaps as empty graphs.

    A recording that stops mid-interaction gets no closing difference: its
    holds stay open rather than turning into releases nobody demonstrated.
    """
    out = []
    prev = None
    for u in units:
        if u.after_gap and prev is not None:
            out.append(Transition(prev, None, diff(None, prev.g_repr)))
            prev = None
        out.append(Transition(prev, u, diff(u.g_repr, prev.g_repr if prev else None)))
        prev = u
    if prev is not None and not prev.at_end:
        out.append(Transition(prev, None, diff(None, prev.g_repr)))
    return out


def _ho_of(d: dict, hand: str, g: BimanualGraph | None) -> Edge | None:
    if g is None:
        return None
    e = g.hand(hand).ho_edge
    return e if e is not None and e.key in d else None


def _role(c: CoordinationMode, hand: str) -> str:
    if c.kind is ModeKind.SEQUENTIAL:
        return "dom" if hand == c.dom_hand else "ref"
    return ""


def extract_primitives(units: list[InteractionUnit], d_oo_th: float = 0.05, theta_mi: float = 0.25,
                       window_s: float = 1.0) -> list[Primitive]:
    """Primitive list P from the unit sequence (one batch per graph difference)."""
    prims: list[Primitive] = []
    for tr in transitions(units):
        prims.extend(_from_transition(tr, d_oo_th, theta_mi, window_s))
    return [replace(p, index=i) for i, p in enumerate(prims)]


def _from_transition(tr: Transition, d_oo_th, theta_mi, window_s) -> list[Primitive]:
    g_prev = tr.prev.g_repr if tr.prev else None
    g_next = tr.next.g_repr if tr.next else None
    c_prev = tr.prev.c if tr.prev else None
    c_next = tr.next.c if tr.next else None
    d = tr.diff

    grasps, releases = [], []
    busy = set()
    for hand in HANDS:
        new = _ho_of(d.added, hand, g_next)
        old = _ho_of(d.removed, hand, g_prev)
        if new is not None and old is not None and set(new.tip.elements) & set(old.tip.elements):
            # the hand's node grew into (or shrank from) a unity: the grasp is unchanged
            busy.add(hand)
            continue
        if new is not None:
            role = _role(c_next, hand)
            grasps.append(Primitive(c_next, Action.MOVE, hand, new.tip.key, new.rel_pose, role=role, relation="HO"))
            grasps.append(Primitive(c_next, Action.GRASP, hand, new.tip.key, role=role))
            busy.add(hand)
        if old is not None:
            releases.append(Primitive(c_prev, Action.RELEASE, hand, old.tip.key, role=_role(c_prev, hand)))

    oo_moves = []
    for key, e in sorted(d.added.items()):
        if e.relation != "OO":
            continue
        holders = [h for h in HANDS if g_next.hand(h).manipulated is not None
                   and g_next.hand(h).manipulated.key == e.tail.key]
        if not holders:
            raise OrphanOO(f"OO {e.tail.label}->{e.tip.label} appears while no hand holds {e.tail.label}")
        offsets = tuple((h, g_next.hand(h).ho_edge.rel_pose) for h in holders)
        if len(holders) == 2 and c_next.kind is ModeKind.SYNCHRONOUS:
            oo_moves.append(Primitive(c_next, Action.MOVE, "Both", e.tip.key, e.rel_pose, moved=e.tail.key,
                                      grasp_offsets=offsets, relation="OO"))
        else:
            for h in holders:
                oo_moves.append(Primitive(c_next, Action.MOVE, h, e.tip.key, e.rel_pose, moved=e.tail.key,
                                          grasp_offsets=tuple(o for o in offsets if o[0] == h),
                                          role=_role(c_next, h), relation="OO"))
        busy.update(holders)

    holds, placeholders = [], []
    if tr.next is not None:
        for hand in HANDS:
            g = g_next.hand(hand)
            if g.is_empty:
                continue
            st = tr.next.stats.get(hand, HandStats())
            if (hand not in busy and c_next.kind in (ModeKind.SEQUENTIAL, ModeKind.UNCOORDINATED)
                    and st.max_deviation < d_oo_th):
                holds.append(Primitive(c_next, Action.KEEP_GRASP, hand, g.manipulated.key, role=_role(c_next, hand)))
            elif (g.oo_edge is None and st.duration_s >= window_s and st.mean_mi > theta_mi
                  and st.net_displacement < d_oo_th):
                placeholders.append(Primitive(c_next, Action.PLACEHOLDER, hand, g.manipulated.key,
                                              role=_role(c_next, hand)))

    additions = grasps + oo_moves + holds + placeholders
    if c_prev is not None and c_next is not None and c_prev.key != c_next.key:
        return releases + additions
    # a hand switching objects lets go of the old one first
    regrasp = {p.hand for p in grasps}
    first = [p for p in releases if p.hand in regrasp]
    last = [p for p in releases if p.hand not in regrasp]
    return first + additions + last


def balance_report(prims: list[Primitive]) -> dict:
    """Grasp/Release alternation per (hand, target); unmatched grasps are listed, not errors."""
    open_grasps: dict = {}
    violations = []
    for p in prims:
        hands = ("Right", "Left") if p.hand == "Both" else (p.hand,)
        for h in hands:
            if p.action is Action.GRASP:
                if h in open_grasps:
                    violations.append(f"{h} grasps {p.target} while holding {open_grasps[h]}")
                open_grasps[h] = p.target
            elif p.action is Action.RELEASE:
                if h not in open_grasps:
                    violations.append(f"{h} releases {p.target} without a grasp")
                open_grasps.pop(h, None)
    return {"unmatched_grasps": {h: list(t) for h, t in open_grasps.items()}, "violations": violations}


def report(units: list[InteractionUnit], prims: list[Primitive]) -> dict:
    return {
        "units": [
            {
                "index": u.index,
                "t_start": round(u.t_start, 6),
                "t_end": round(u.t_end, 6),
                "c": u.c.to_dict(),
                "signature": signature_labels(u.signature),
            }
            for u in units
        ],
        "primitives": [p.to_dict() for p in prims],
        "balance": balance_report(prims),
    }


def report_json(units, prims) -> str:
    return json.dumps(report(units, prims), indent=2, sort_keys=True)
