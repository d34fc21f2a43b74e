"""Per-frame hand scene graphs.

Each hand graph is either empty or ``hand -> manipulated node [-> background]``
where the manipulated node is a single object or a unity of objects moving
together.  Interaction decisions come from windowed estimators evaluated
over the whole trace at once (:class:`InteractionTracks`), then debounced in
a single sequential pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import infotheory as it
from .config import DetectorConfig
from .errors import MalformedGraph, UnknownElement, WindowOutOfRange
from .trace import Trace
from .transforms import RigidTransform, relative_transform

HANDS = ("Right", "Left")


class Role(str, Enum):
    HAND = "Hand"
    MANIPULATED = "ManipulatedObject"
    UNITY = "Unity"
    BACKGROUND = "BackgroundObject"


class Topology(str, Enum):
    EMPTY = "Empty"
    A = "A"
    B = "B"
    C = "C"
    D = "D"


@dataclass(frozen=True)
class NodeRef:
    role: Role
    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted(self.elements)))

    @property
    def key(self) -> tuple:
        return self.elements

    @property
    def anchor(self) -> str:
        """Element whose pose stands for the node (first member of a unity)."""
        return self.elements[0]

    @property
    def label(self) -> str:
        if len(self.elements) == 1:
            return self.elements[0]
        return "{" + "+".join(self.elements) + "}"


@dataclass(frozen=True)
class Edge:
    tail: NodeRef
    tip: NodeRef
    relation: str  # "HO" or "OO"
    rel_pose: RigidTransform
    mi_bits: float | None = None

    @property
    def key(self) -> tuple:
        return (self.tail.key, self.tip.key, self.relation)


@dataclass(frozen=True)
class SceneGraph:
    hand: str
    frame_t: float
    nodes: tuple = ()
    edges: tuple = ()
    frame: int = -1

    @classmethod
    def empty(cls, hand: str, frame_t: float, frame: int = -1) -> "SceneGraph":
        return cls(hand, frame_t, (), (), frame)

    @property
    def is_empty(self) -> bool:
        return not self.nodes and not self.edges

    def _edges(self, relation):
        return [e for e in self.edges if e.relation == relation]

    @property
    def ho_edge(self) -> Edge | None:
        ho = self._edges("HO")
        return ho[0] if ho else None

    @property
    def oo_edge(self) -> Edge | None:
        oo = self._edges("OO")
        return oo[0] if oo else None

    @property
    def manipulated(self) -> NodeRef | None:
        e = self.ho_edge
        return e.tip if e else None

    @property
    def background(self) -> NodeRef | None:
        e = self.oo_edge
        return e.tip if e else None

    @property
    def hand_node(self) -> NodeRef | None:
        hands = [n for n in self.nodes if n.role is Role.HAND]
        return hands[0] if hands else None

    def topology(self) -> Topology:
        return topology(self)


def topology(graph: SceneGraph) -> Topology:
    """Structural class of a hand graph; raises MalformedGraph on invalid structure."""
    if graph.is_empty:
        return Topology.EMPTY
    hands = [n for n in graph.nodes if n.role is Role.HAND]
    if len(hands) != 1:
        raise MalformedGraph(f"expected one hand node, found {len(hands)}")
    ho = graph._edges("HO")
    oo = graph._edges("OO")
    if len(ho) != 1:
        raise MalformedGraph(f"expected one HO edge, found {len(ho)}")
    if len(oo) > 1:
        raise MalformedGraph(f"at most one OO edge allowed, found {len(oo)}")
    if len(ho) + len(oo) != len(graph.edges):
        raise MalformedGraph("unknown edge relation")
    hand = hands[0]
    e = ho[0]
    if e.tail != hand:
        raise MalformedGraph("HO edge must start at the hand node")
    if e.mi_bits is None or e.mi_bits < 0:
        raise MalformedGraph("HO edge needs a non-negative mi_bits attribute")
    manip = e.tip
    if manip.role is Role.UNITY:
        if len(manip.elements) < 2:
            raise MalformedGraph("a unity needs at least two objects")
    elif manip.role is not Role.MANIPULATED or len(manip.elements) != 1:
        raise MalformedGraph("HO tip must be a manipulated object or unity")
    if oo:
        o = oo[0]
        if o.mi_bits is not None:
            raise MalformedGraph("OO edges carry no mi_bits")
        if o.tail != manip:
            raise MalformedGraph("OO edge must start at the manipulated node")
        if o.tip.role is not Role.BACKGROUND or len(o.tip.elements) != 1:
            raise MalformedGraph("OO tip must be a single background object")
        if set(o.tip.elements) & set(manip.elements):
            raise MalformedGraph("background object is part of the manipulated node")
    expected = {hand, manip} | ({oo[0].tip} if oo else set())
    if set(graph.nodes) != expected or len(graph.nodes) != len(expected):
        raise MalformedGraph("node set does not match edges")
    if manip.role is Role.UNITY:
        return Topology.D if oo else Topology.B
    return Topology.C if oo else Topology.A


def make_graph(hand: str, hand_name: str, frame_t: float, manipulated, mi_bits: float,
               ho_pose: RigidTransform, background: str | None = None,
               oo_pose: RigidTransform | None = None, frame: int = -1) -> SceneGraph:
    """Convenience constructor; ``manipulated`` is an object name or a collection of names."""
    members = (manipulated,) if isinstance(manipulated, str) else tuple(manipulated)
    h = NodeRef(Role.HAND, (hand_name,))
    m = NodeRef(Role.UNITY if len(members) > 1 else Role.MANIPULATED, members)
    nodes = [h, m]
    edges = [Edge(h, m, "HO", ho_pose, float(mi_bits))]
    if background is not None:
        b = NodeRef(Role.BACKGROUND, (background,))
        nodes.append(b)
        edges.append(Edge(m, b, "OO", oo_pose or RigidTransform.identity()))
    return SceneGraph(hand, frame_t, tuple(nodes), tuple(edges), frame)


# --- debouncing -----------------------------------------------------------

def _runs(values: np.ndarray):
    """Yield (start, stop, value) for maximal runs of equal values."""
    n = len(values)
    if n == 0:
        return
    change = np.flatnonzero(values[1:] != values[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    for a, b in zip(bounds[:-1], bounds[1:]):
        yield int(a), int(b), bool(values[a])


def drop_short_runs(raw, min_len: int) -> np.ndarray:
    """Clear True runs shorter than ``min_len`` frames."""
    raw = np.asarray(raw, dtype=bool)
    out = raw.copy()
    for a, b, v in _runs(raw):
        if v and b - a < min_len:
            out[a:b] = False
    return out


def debounce(raw, min_len: int, initial: bool = False) -> np.ndarray:
    """Flip state only on runs of at least ``min_len`` opposite decisions.

    Offline filter: an accepted run takes effect from its first frame.
    """
    raw = np.asarray(raw, dtype=bool)
    out = np.empty_like(raw)
    state = initial
    for a, b, v in _runs(raw):
        if v != state and b - a >= min_len:
            state = v
        out[a:b] = state
    return out


def latch(on_raw, off_raw, min_len: int) -> np.ndarray:
    """Hysteresis: switch on after a sustained ``on_raw`` run, off after a sustained ``off_raw`` run."""
    on_f = drop_short_runs(on_raw, min_len)
    off_f = drop_short_runs(off_raw, min_len)
    out = np.zeros(len(on_f), dtype=bool)
    state = False
    for k in range(len(on_f)):
        if not state and on_f[k]:
            state = True
        elif state and off_f[k]:
            state = False
        out[k] = state
    return out


# --- trace-wide interaction tracks ----------------------------------------

@dataclass
class InteractionTracks:
    """Windowed metrics and debounced interaction states for every element pair.

    Arrays are indexed by *valid frame*: grid frames whose full window lies
    inside the trace (``frames`` maps them back to grid indices).
    """

    trace: Trace
    cfg: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self):
        if not self.trace.normalized:
            raise ValueError("InteractionTracks needs a normalized trace")
        self.half = it.WindowSpec(self.cfg.window_s).half_samples(self.trace.rate_hz)
        self.width = 2 * self.half + 1
        n = len(self.trace)
        if self.width > n:
            raise WindowOutOfRange(f"trace of {n} samples is shorter than one window ({self.width})")
        self.frames = np.arange(self.half, n - self.half)
        self.times = self.trace.timestamps[self.frames]
        self.hands = {h: self.trace.right_hand if h == "Right" else self.trace.left_hand for h in HANDS}
        self.objects = self.trace.objects
        self._mi: dict = {}
        self._dbar: dict = {}
        self._dent: dict = {}
        self._ho: dict = {}
        self._oo: dict = {}
        self._unity: dict = {}

    def __len__(self):
        return len(self.frames)

    def index_of(self, t: float) -> int:
        """Valid-frame index nearest to time ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 0.5 / self.trace.rate_hz + 1e-9:
            raise WindowOutOfRange(f"no full window is centered at t={t:.3f}")
        return k

    # raw metrics
    def mi(self, a: str, b: str) -> np.ndarray:
        key = tuple(sorted((a, b)))
        if key not in self._mi:
            c = self.cfg
            self._mi[key] = it.series_mi(self.trace.positions(key[0]), self.trace.positions(key[1]),
                                         self.width, c.bins, c.aggregate, c.resolution_m)
        return self._mi[key]

    def mean_distance(self, a: str, b: str) -> np.ndarray:
        key = tuple(sorted((a, b)))
        if key not in self._dbar:
            self._dbar[key] = it.series_distance(self.trace.positions(key[0]),
                                                 self.trace.positions(key[1]), self.width)
        return self._dbar[key]

    def distance(self, a: str, b: str) -> np.ndarray:
        """Per-frame distance at the valid frames."""
        pa = self.trace.positions(a)[self.frames]
        pb = self.trace.positions(b)[self.frames]
        return np.linalg.norm(pa - pb, axis=1)

    def distance_entropy(self, a: str, b: str) -> np.ndarray:
        key = tuple(sorted((a, b)))
        if key not in self._dent:
            c = self.cfg
            self._dent[key] = it.series_distance_entropy(self.mean_distance(a, b), self.half,
                                                         c.bins, c.entropy_resolution_m)
        return self._dent[key]

    def unity_metric(self, members) -> np.ndarray:
        members = sorted(members)
        c = self.cfg
        if len(members) == 2:
            return self.mi(*members)
        return it.series_coinfo([self.trace.positions(m) for m in members], self.width,
                                c.bins, c.aggregate, c.resolution_m)

    # raw decisions
    def ho_raw(self, hand_name: str, obj: str) -> np.ndarray:
        return (self.mi(hand_name, obj) > self.cfg.theta_mi) & (self.mean_distance(hand_name, obj) < self.cfg.d_ho_th)

    def oo_raw(self, a: str, b: str) -> np.ndarray:
        return (self.distance_entropy(a, b) < self.cfg.theta_h) & (self.mean_distance(a, b) < self.cfg.d_oo_th)

    def unity_raw(self, members) -> np.ndarray:
        return self.unity_metric(members) > self.cfg.theta_ci

    # debounced / latched states
    def ho_state(self, hand_name: str, obj: str) -> np.ndarray:
        """HO starts on sustained shared information plus proximity; ends when the hand moves away.

        Release is judged on the per-frame distance: the windowed mean runs
        ahead of a hand that accelerates away.
        """
        key = (hand_name, obj)
        if key not in self._ho:
            far = self.distance(hand_name, obj) >= self.cfg.d_ho_th
            self._ho[key] = latch(self.ho_raw(hand_name, obj), far, self.cfg.debounce_frames)
        return self._ho[key]

    def oo_state(self, a: str, b: str) -> np.ndarray:
        key = tuple(sorted((a, b)))
        if key not in self._oo:
            far = self.distance(a, b) >= self.cfg.d_oo_th
            self._oo[key] = latch(self.oo_raw(a, b), far, self.cfg.debounce_frames)
        return self._oo[key]

    def unity_onsets(self, members) -> np.ndarray:
        key = frozenset(members)
        if key not in self._unity:
            self._unity[key] = drop_short_runs(self.unity_raw(members), self.cfg.debounce_frames)
        return self._unity[key]

    def oo_run_start(self, a: str, b: str, k: int) -> int:
        state = self.oo_state(a, b)
        j = k
        while j > 0 and state[j - 1]:
            j -= 1
        return j

    def motion_extent(self, name: str, k: int) -> float:
        """Largest displacement from the frame-``k`` position within two windows either side."""
        pos = self.trace.positions(name)
        g = int(self.frames[k])
        lo, hi = max(0, g - 2 * self.width), min(len(pos), g + 2 * self.width + 1)
        return float(np.max(np.linalg.norm(pos[lo:hi] - pos[g], axis=1)))


# --- graph series ----------------------------------------------------------

@dataclass
class _HandState:
    node: NodeRef | None = None
    since: int = 0
    background: str | None = None


class GraphBuilder:
    """Builds the debounced (G_R, G_L) series for every valid frame of a trace."""

    ORIENT_TIE_BITS = 0.01

    def __init__(self, trace: Trace, cfg: DetectorConfig | None = None):
        self.cfg = cfg or DetectorConfig()
        self._orient: dict = {}
        self.tracks = InteractionTracks(trace, self.cfg)
        self.trace = trace

    @cached_property
    def series(self) -> list[tuple[SceneGraph, SceneGraph]]:
        return self._build()

    def _held_sets(self) -> dict:
        tr = self.tracks
        held = {}
        for hand, name in tr.hands.items():
            if name is None or not tr.objects:
                held[hand] = np.zeros((len(tr), len(tr.objects)), dtype=bool)
                continue
            held[hand] = np.column_stack([tr.ho_state(name, o) for o in tr.objects])
        return held

    def _manipulated(self, hand: str, k: int, members: list, prev: _HandState) -> NodeRef | None:
        tr = self.tracks
        if not members:
            return None
        if prev.node is not None and prev.node.role is Role.UNITY and set(members) <= set(prev.node.elements):
            return prev.node
        if len(members) == 1:
            return NodeRef(Role.MANIPULATED, (members[0],))
        if prev.node is not None and prev.node.role is Role.UNITY and set(members) <= set(prev.node.elements):
            # a unity outlives the staggered release of its members
            return prev.node
        if tr.unity_onsets(members)[k]:
            return NodeRef(Role.UNITY, tuple(members))
        if prev.node is not None and prev.node.role is Role.MANIPULATED and prev.node.anchor in members:
            return prev.node
        name = tr.hands[hand]
        best = max(members, key=lambda o: (tr.mi(name, o)[k], -members.index(o)))
        return NodeRef(Role.MANIPULATED, (best,))

    def _background(self, hand: str, k: int, node: NodeRef, state: _HandState,
                    other: NodeRef | None, held_any: set) -> str | None:
        other_hand = "Left" if hand == "Right" else "Right"
        tr = self.tracks
        cands = []
        for b in tr.objects:
            if b in node.elements:
                continue
            if self.cfg.bkg_scope == "unheld" and b in held_any:
                continue
            on_members = [m for m in node.elements if tr.oo_state(m, b)[k]]
            if node.role is Role.UNITY:
                on_members = [m for m in on_members if tr.oo_run_start(m, b, k) >= state.since]
            if not on_members:
                continue
            if other is not None and b in other.elements and not self._oriented_from(
                    hand, node, other_hand, other, k):
                continue
            d = min(tr.mean_distance(m, b)[k] for m in on_members)
            cands.append((d, b))
        if not cands:
            return None
        names = [b for _, b in cands]
        if state.background in names:
            return state.background
        return min(cands)[1]

    def _oriented_from(self, hand: str, node: NodeRef, other_hand: str, other: NodeRef, k: int) -> bool:
        """Orient an OO between two held objects: the hand sharing more information is placing its object.

        Mean hand-object MI over two windows either side of the first frame the
        pair is seen decides, and the choice sticks for the rest of the OO run.
        """
        tr = self.tracks
        key = (node.key, other.key)
        cache = self._orient
        start = min(tr.oo_run_start(m, o, k) for m in node.elements for o in other.elements
                    if tr.oo_state(m, o)[k])
        if key in cache and cache[key][0] == start:
            return cache[key][1]
        lo, hi = max(0, k - 2 * tr.width), min(len(tr), k + 2 * tr.width + 1)
        mine = np.mean([tr.mi(tr.hands[hand], m)[lo:hi].mean() for m in node.elements])
        theirs = np.mean([tr.mi(tr.hands[other_hand], o)[lo:hi].mean() for o in other.elements])
        decision = bool(mine > theirs + self.ORIENT_TIE_BITS)
        cache[key] = (start, decision)
        return decision

    def _build(self):
        tr = self.tracks
        held = self._held_sets()
        states = {h: _HandState() for h in HANDS}
        out = []
        for k in range(len(tr)):
            t = float(tr.times[k])
            g = int(tr.frames[k])
            nodes = {}
            for hand in HANDS:
                members = [o for j, o in enumerate(tr.objects) if held[hand][k, j]]
                node = self._manipulated(hand, k, members, states[hand])
                if node != states[hand].node:
                    states[hand] = _HandState(node, k, None)
                nodes[hand] = node
            held_any = {o for h in HANDS for j, o in enumerate(tr.objects) if held[h][k, j]}
            graphs = {}
            for hand in HANDS:
                node = nodes[hand]
                if node is None:
                    graphs[hand] = SceneGraph.empty(hand, t, k)
                    continue
                other = nodes["Left" if hand == "Right" else "Right"]
                bkg = self._background(hand, k, node, states[hand], other, held_any)
                states[hand].background = bkg
                graphs[hand] = self._graph(hand, k, g, t, node, bkg)
            out.append((graphs["Right"], graphs["Left"]))
        return out

    def _graph(self, hand, k, g, t, node, bkg):
        tr = self.tracks
        name = tr.hands[hand]
        mi = float(np.mean([tr.mi(name, m)[k] for m in node.elements]))
        ho_pose = relative_transform(self.trace.pose(name, g), self.trace.pose(node.anchor, g))
        oo_pose = None
        if bkg is not None:
            oo_pose = relative_transform(self.trace.pose(node.anchor, g), self.trace.pose(bkg, g))
        return make_graph(hand, name, t, node.elements, mi, ho_pose, bkg, oo_pose, frame=k)


# --- point queries ------------------------------------------------------------

def _in_sustained_run(raw: np.ndarray, k: int, min_len: int) -> bool:
    return bool(drop_short_runs(raw, min_len)[k])


def _tracks(trace, cfg) -> InteractionTracks:
    return InteractionTracks(trace, cfg or DetectorConfig())


def _check(trace, *names):
    for n in names:
        if n not in trace.elements:
            raise UnknownElement(f"no element named {n!r}")


def detect_ho(trace: Trace, hand: str, obj: str, t: float, cfg: DetectorConfig | None = None):
    """Sustained HO decision at ``t`` and the MI between hand and object there."""
    _check(trace, hand, obj)
    tr = _tracks(trace, cfg)
    k = tr.index_of(t)
    return _in_sustained_run(tr.ho_raw(hand, obj), k, tr.cfg.debounce_frames), float(tr.mi(hand, obj)[k])


def detect_unity(trace: Trace, objects, t: float, cfg: DetectorConfig | None = None) -> bool:
    objects = sorted(objects)
    if len(objects) < 2:
        raise ValueError("a unity needs at least two objects")
    _check(trace, *objects)
    tr = _tracks(trace, cfg)
    k = tr.index_of(t)
    return _in_sustained_run(tr.unity_raw(objects), k, tr.cfg.debounce_frames)


def detect_oo(trace: Trace, o_m: str, o_bkg: str, t: float, cfg: DetectorConfig | None = None) -> bool:
    _check(trace, o_m, o_bkg)
    tr = _tracks(trace, cfg)
    k = tr.index_of(t)
    return _in_sustained_run(tr.oo_raw(o_m, o_bkg), k, tr.cfg.debounce_frames)


def build_graph(trace: Trace, hand: str, t: float, cfg: DetectorConfig | None = None,
                builder: GraphBuilder | None = None) -> SceneGraph:
    """Debounced graph of ``hand`` ("Right"/"Left") at time ``t``."""
    if hand not in HANDS:
        raise ValueError(f"hand must be one of {HANDS}")
    builder = builder or GraphBuilder(trace, cfg)
    k = builder.tracks.index_of(t)
    pair = builder.series[k]
    return pair[0] if hand == "Right" else pair[1]


def graph_to_dict(g: SceneGraph) -> dict:
    return {
        "hand": g.hand,
        "t": round(g.frame_t, 6),
        "topology": topology(g).value,
        "edges": [
            {
                "tail": e.tail.label,
                "tip": e.tip.label,
                "relation": e.relation,
                "mi_bits": None if e.mi_bits is None else round(e.mi_bits, 6),
                "rel_pose": [round(v, 9) for v in e.rel_pose.as_tuple7()],
            }
            for e in g.edges
        ],
    }
