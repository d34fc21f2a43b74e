"""Bimanual graph merging, coordination-mode classification and dominance."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import FrameMismatch, NotSequential, UnclassifiableTopology
from .scene_graphs import SceneGraph, topology

DEFAULT_TIE_EPS = 0.01


class ModeKind(str, Enum):
    IDLE = "Idle"
    ONE_ARM = "OneArm"
    UNCOORDINATED = "Uncoordinated"
    SYNCHRONOUS = "Synchronous"
    SEQUENTIAL = "Sequential"


@dataclass(frozen=True)
class CoordinationMode:
    kind: ModeKind
    active: str | None = None  # OneArm only
    dom_hand: str | None = None  # Sequential only
    o_dom: tuple | None = None  # node keys
    o_ref: tuple | None = None
    label: str = ""  # topology-pair row: idle, one_arm, alpha, beta, gamma, delta_eta

    @property
    def key(self) -> tuple:
        """What must stay constant inside an interaction unit."""
        return (self.kind, self.active)

    @property
    def ref_hand(self) -> str | None:
        if self.dom_hand is None:
            return None
        return "Left" if self.dom_hand == "Right" else "Right"

    def describe(self) -> str:
        if self.kind is ModeKind.ONE_ARM:
            return f"OneArm({self.active})"
        if self.kind is ModeKind.SEQUENTIAL and self.dom_hand:
            return f"Sequential(dom={self.dom_hand})"
        return self.kind.value

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "label": self.label}
        if self.active:
            d["active"] = self.active
        if self.dom_hand:
            d.update(dom_hand=self.dom_hand, o_dom=list(self.o_dom), o_ref=list(self.o_ref))
        return d


@dataclass(frozen=True)
class BimanualGraph:
    g_r: SceneGraph
    g_l: SceneGraph
    frame_t: float
    c: CoordinationMode | None = None
    frame: int = -1
    nodes: dict = field(default_factory=dict, compare=False)  # key -> set of roles
    edges: dict = field(default_factory=dict, compare=False)  # edge key -> list of Edge

    @property
    def is_idle(self) -> bool:
        return self.g_r.is_empty and self.g_l.is_empty

    def hand(self, side: str) -> SceneGraph:
        return self.g_r if side == "Right" else self.g_l

    def edge_keys(self) -> frozenset:
        return frozenset(self.edges)

    def in_degree(self, key: tuple) -> int:
        return sum(1 for ek, es in self.edges.items() for _ in es if ek[1] == key)

    def with_mode(self, c: CoordinationMode) -> "BimanualGraph":
        return replace(self, c=c)


def merge(g_r: SceneGraph, g_l: SceneGraph) -> BimanualGraph:
    """Union of the two hand graphs; shared elements appear once."""
    if abs(g_r.frame_t - g_l.frame_t) > 1e-9:
        raise FrameMismatch(f"graphs at t={g_r.frame_t} and t={g_l.frame_t}")
    nodes: dict = {}
    for g in (g_r, g_l):
        for n in g.nodes:
            nodes.setdefault(n.key, set()).add(n.role)
    edges: dict = {}
    for g in (g_r, g_l):
        for e in g.edges:
            edges.setdefault(e.key, []).append(e)
    return BimanualGraph(g_r, g_l, g_r.frame_t, None, g_r.frame, nodes, edges)


def _overlaps(a, b) -> bool:
    return a is not None and b is not None and bool(set(a.elements) & set(b.elements))


def table_label(g_b: BimanualGraph) -> str:
    """Topology-pair row of a merged graph: idle, one_arm, alpha, beta, gamma or delta_eta."""
    tr, tl = topology(g_b.g_r), topology(g_b.g_l)
    if tr.value == "Empty" and tl.value == "Empty":
        return "idle"
    if tr.value == "Empty" or tl.value == "Empty":
        return "one_arm"
    m_r, m_l = g_b.g_r.manipulated, g_b.g_l.manipulated
    b_r, b_l = g_b.g_r.background, g_b.g_l.background
    if _overlaps(m_r, m_l):
        return "gamma"
    if _overlaps(m_l, b_r) or _overlaps(m_r, b_l):
        return "delta_eta"
    if b_r is not None and b_r == b_l:
        return "beta"
    if m_r is None or m_l is None:
        raise UnclassifiableTopology("non-empty hand graph without a manipulated node")
    return "alpha"


def classify(g_b: BimanualGraph, tie_eps: float = DEFAULT_TIE_EPS) -> CoordinationMode:
    label = table_label(g_b)
    if label == "idle":
        return CoordinationMode(ModeKind.IDLE, label=label)
    if label == "one_arm":
        active = "Left" if g_b.g_r.is_empty else "Right"
        return CoordinationMode(ModeKind.ONE_ARM, active=active, label=label)
    if label == "gamma":
        return CoordinationMode(ModeKind.SYNCHRONOUS, label=label)
    if label == "delta_eta":
        dom, o_dom, o_ref = _dominance(g_b, tie_eps)
        return CoordinationMode(ModeKind.SEQUENTIAL, dom_hand=dom, o_dom=o_dom, o_ref=o_ref, label=label)
    return CoordinationMode(ModeKind.UNCOORDINATED, label=label)


def _dominance(g_b: BimanualGraph, tie_eps: float):
    mi_r = g_b.g_r.ho_edge.mi_bits
    mi_l = g_b.g_l.ho_edge.mi_bits
    m_r, m_l = g_b.g_r.manipulated, g_b.g_l.manipulated
    if abs(mi_r - mi_l) >= tie_eps:
        dom = "Right" if mi_r > mi_l else "Left"
    else:
        # structural tie-break: the object serving as the other's background is the reference
        r_refs_l = _overlaps(m_l, g_b.g_r.background)  # right's o_m rests on left's o_m
        l_refs_r = _overlaps(m_r, g_b.g_l.background)
        if r_refs_l and not l_refs_r:
            dom = "Right"
        elif l_refs_r and not r_refs_l:
            dom = "Left"
        else:
            dom = "Right"
    if dom == "Right":
        return dom, m_r.key, m_l.key
    return dom, m_l.key, m_r.key


def resolve_dominant(g_b: BimanualGraph, tie_eps: float = DEFAULT_TIE_EPS):
    """(dom_hand, o_dom, o_ref) of a Sequential merged graph."""
    if table_label(g_b) != "delta_eta":
        raise NotSequential("dominance is only defined for Sequential graphs")
    return _dominance(g_b, tie_eps)


def classify_series(pairs, tie_eps: float = DEFAULT_TIE_EPS) -> list[BimanualGraph]:
    out = []
    for g_r, g_l in pairs:
        g_b = merge(g_r, g_l)
        out.append(g_b.with_mode(classify(g_b, tie_eps)))
    return out


def diagnostics(g_b: BimanualGraph) -> dict:
    """Per-frame record: topology-pair row, mode, and HO mutual information per hand."""
    c = g_b.c or classify(g_b)
    rec = {"t": round(g_b.frame_t, 6), "label": table_label(g_b), "c": c.to_dict(), "mi": {}}
    for side in ("Right", "Left"):
        e = g_b.hand(side).ho_edge
        if e is not None:
            rec["mi"][side] = {"object": e.tip.label, "bits": round(e.mi_bits, 6)}
    if rec["label"] == "beta":
        rec["warning"] = f"shared background {g_b.g_r.background.label}: possible workspace conflict"
    return rec
