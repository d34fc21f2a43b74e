"""Behavior-tree plans: node model, coordination subtree templates, XML I/O and lint.

Every parameter is stored as a string so that ``parse(serialize(plan))``
reproduces the plan exactly; transforms are written as
``"tx ty tz qw qx qy qz"`` with nine decimals.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from itertools import groupby

from .coordination import ModeKind
from .errors import MalformedP, MissingGraspOffsets, NotSequentialSlice, SchemaViolation
from .segmentation import Action, Primitive
from .transforms import RigidTransform

CONTROL = ("Sequence", "Fallback", "Parallel")
DECORATOR_POLICIES = ("KeepRunningUntilSuccess",)
ACTIONS = (
    "AcquirePose",
    "ExecuteTrajectoryTo",
    "ExecCoordinatedTrajectoryTo",
    "Grasp",
    "Release",
    "KeepGrasp",
    "MotionPrimitive",
)
CONDITIONS = ("AtTarget",)
ARMS = ("ArmX", "ArmY", "Both")
SCHEMA_VERSION = "1"
DEFAULT_ROLE_MAP = {"Right": "ArmX", "Left": "ArmY"}


@dataclass(frozen=True)
class BTNode:
    kind: str  # Sequence, Fallback, Parallel, Decorator, Action, Condition
    name: str = ""  # action/condition name or decorator policy
    params: tuple = ()  # ((key, value), ...) with string values, in document order
    arm: str = ""
    children: tuple = ()

    def param(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def is_leaf(self) -> bool:
        return self.kind in ("Action", "Condition")

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def leaves(self):
        return [n for n in self.walk() if n.is_leaf]

    def size(self) -> int:
        return sum(1 for _ in self.walk())


@dataclass(frozen=True)
class Plan:
    root: BTNode
    role_map: dict = field(default_factory=lambda: dict(DEFAULT_ROLE_MAP))
    provenance: dict = field(default_factory=dict)

    @property
    def subtrees(self) -> tuple:
        return self.root.children


# --- parameter formatting ---------------------------------------------------

def fmt_transform(t: RigidTransform) -> str:
    return " ".join(f"{v:.9f}" for v in t.as_tuple7())


def parse_transform(text: str) -> RigidTransform:
    values = text.split()
    if len(values) != 7:
        raise SchemaViolation(f"transform needs 7 numbers, got {len(values)}")
    try:
        return RigidTransform.from_tuple7(float(v) for v in values)
    except ValueError as exc:
        raise SchemaViolation(f"bad transform {text!r}: {exc}") from None


def fmt_target(key) -> str:
    return key if isinstance(key, str) else "+".join(key)


def target_members(text: str) -> tuple:
    return tuple(text.split("+"))


# --- node constructors ------------------------------------------------------

def seq(*children, **annotations) -> BTNode:
    return BTNode("Sequence", params=tuple(annotations.items()), children=tuple(children))


def fallback(*children) -> BTNode:
    return BTNode("Fallback", children=tuple(children))


def parallel(*children, **annotations) -> BTNode:
    if len(children) < 2:
        raise SchemaViolation("Parallel needs at least two children")
    return BTNode("Parallel", params=tuple(annotations.items()), children=tuple(children))


def keep_running(child: BTNode) -> BTNode:
    return BTNode("Decorator", "KeepRunningUntilSuccess", children=(child,))


def action(name: str, arm: str, **params) -> BTNode:
    return BTNode("Action", name, tuple(params.items()), arm)


def condition(name: str, arm: str, **params) -> BTNode:
    return BTNode("Condition", name, tuple(params.items()), arm)


# --- subtree templates --------------------------------------------------------

def build_move_subtree(target, rel_transform: RigidTransform, arm: str, moved=None,
                       cond_id: str | None = None) -> BTNode:
    """AcquirePose(target) then reach ``target ∘ rel_transform`` unless already there.

    Without ``moved`` the arm's gripper is driven; with ``moved`` the held
    object is placed relative to ``target``.
    """
    params = {"target": fmt_target(target), "transform": fmt_transform(rel_transform)}
    if moved is not None:
        params["moved"] = fmt_target(moved)
    cond_params = dict(params)
    if cond_id is not None:
        cond_params["id"] = cond_id
    return seq(
        action("AcquirePose", arm, target=params["target"]),
        fallback(condition("AtTarget", arm, **cond_params), action("ExecuteTrajectoryTo", arm, **params)),
    )


def _arm(hand: str, role_map: dict) -> str:
    return "Both" if hand == "Both" else role_map[hand]


def _render(p: Primitive, arm: str, hold: str = "check") -> list[BTNode]:
    """One primitive as a list of nodes for a single-arm sequence."""
    if p.action is Action.MOVE:
        if p.relation == "OO":
            return [build_move_subtree(p.target, p.transform, arm, moved=p.moved)]
        return [build_move_subtree(p.target, p.transform, arm)]
    if p.action is Action.GRASP:
        return [action("Grasp", arm, target=fmt_target(p.target))]
    if p.action is Action.RELEASE:
        return [action("Release", arm, target=fmt_target(p.target))]
    if p.action is Action.KEEP_GRASP:
        return [action("KeepGrasp", arm, target=fmt_target(p.target), hold=hold)]
    if p.action is Action.PLACEHOLDER:
        return [action("MotionPrimitive", arm, target=fmt_target(p.target), tag="move_" + fmt_target(p.target))]
    raise MalformedP(f"cannot render {p.action}")


def _check_balance(prims, holding: bool) -> bool:
    for p in prims:
        if p.action is Action.GRASP:
            if holding:
                raise MalformedP(f"{p.hand} grasps {p.target} while already holding")
            holding = True
        elif p.action is Action.RELEASE:
            if not holding:
                raise MalformedP(f"{p.hand} releases {p.target} before grasping it")
            holding = False
        elif p.action is Action.KEEP_GRASP and not holding:
            raise MalformedP(f"{p.hand} keeps a grasp it never made")
    return holding


def build_one_arm(prims: list[Primitive], arm: str, holding: bool = False,
                  coordination: str = "one_arm") -> BTNode:
    """Sequence of one hand's primitives; ``holding`` is the gripper state on entry."""
    _check_balance(prims, holding)
    children = [n for p in prims for n in _render(p, arm)]
    return seq(*children, coordination=coordination, arm=arm)


def build_uncoordinated(right: list[Primitive], left: list[Primitive], role_map: dict = DEFAULT_ROLE_MAP,
                        holding: dict | None = None) -> BTNode:
    holding = holding or {}
    if not right and not left:
        raise MalformedP("uncoordinated subtree needs at least one non-empty slice")
    branches = [
        build_one_arm(sl, role_map[h], holding.get(h, False), coordination="uncoordinated")
        for h, sl in (("Right", right), ("Left", left)) if sl
    ]
    if len(branches) == 1:
        return branches[0]
    return parallel(*branches, coordination="uncoordinated")


def build_synchronous(prims: list[Primitive], role_map: dict = DEFAULT_ROLE_MAP,
                      holding: dict | None = None) -> BTNode:
    holding = dict(holding or {})
    for h in ("Right", "Left"):
        holding[h] = _check_balance([p for p in prims if p.hand == h], holding.get(h, False))
    children = []
    for p in prims:
        if p.hand == "Both":
            if p.action is not Action.MOVE or p.relation != "OO":
                raise MalformedP(f"two-handed {p.action.value} is not supported")
            offsets = dict(p.grasp_offsets)
            if set(offsets) != {"Right", "Left"}:
                raise MissingGraspOffsets("coordinated move needs grasp offsets for both hands")
            target = fmt_target(p.target)
            params = {
                "target": target,
                "moved": fmt_target(p.moved),
                "transform": fmt_transform(p.transform),
                "offset_" + role_map["Right"]: fmt_transform(offsets["Right"]),
                "offset_" + role_map["Left"]: fmt_transform(offsets["Left"]),
            }
            cond = {k: params[k] for k in ("target", "transform", "moved")}
            children.append(seq(
                action("AcquirePose", "Both", target=target),
                fallback(condition("AtTarget", "Both", **cond),
                         action("ExecCoordinatedTrajectoryTo", "Both", **params)),
            ))
        else:
            children.extend(_render(p, _arm(p.hand, role_map)))
    return seq(*children, coordination="synchronous")


def build_sequential(dom: list[Primitive], ref: list[Primitive], o_dom, o_ref, ref_moves: bool | None = None,
                     dom_hand: str = "Right", role_map: dict = DEFAULT_ROLE_MAP,
                     holding: dict | None = None, cond_id: str = "seq0") -> BTNode:
    """Dominant arm places ``o_dom`` relative to ``o_ref`` while the reference arm holds until done."""
    holding = holding or {}
    ref_hand = "Left" if dom_hand == "Right" else "Right"
    dom_arm, ref_arm = role_map[dom_hand], role_map[ref_hand]
    _check_balance(dom, holding.get(dom_hand, False))
    _check_balance(ref, holding.get(ref_hand, False))
    goal = [p for p in dom if p.action is Action.MOVE and p.relation == "OO"]
    if not goal:
        ref_goal = [p for p in ref if p.action is Action.MOVE and p.relation == "OO"]
        if not ref_goal:
            raise NotSequentialSlice("neither slice places one object relative to the other")
        return _reference_placement(dom, ref, ref_goal[-1], o_dom, o_ref, dom_arm, ref_arm, cond_id)
    goal = goal[-1]
    if ref_moves is None:
        ref_moves = any(p.action is Action.MOVE and p.relation == "OO" for p in ref)
    shared = {"target": fmt_target(goal.target), "transform": fmt_transform(goal.transform),
              "moved": fmt_target(goal.moved), "id": cond_id}

    def place(arm):
        return seq(
            action("AcquirePose", arm, target=shared["target"]),
            fallback(condition("AtTarget", arm, **shared),
                     action("ExecuteTrajectoryTo", arm, **{k: shared[k] for k in ("target", "transform", "moved")})),
        )

    dom_children = []
    for p in dom:
        if p is goal:
            dom_children.append(keep_running(place(dom_arm)) if ref_moves else place(dom_arm))
        elif p.action is Action.KEEP_GRASP:
            continue
        else:
            dom_children.extend(_render(p, dom_arm))

    wait = fallback(condition("AtTarget", ref_arm, **shared), action(
        "KeepGrasp", ref_arm, target=fmt_target(o_ref), hold="continuous"))
    ref_children, waited = [], False
    for p in ref:
        if p.action is Action.KEEP_GRASP or (p.action is Action.RELEASE and not waited):
            if not waited:
                ref_children.append(wait if ref_moves else keep_running(wait))
                waited = True
            if p.action is Action.KEEP_GRASP:
                continue
        ref_children.extend(_render(p, ref_arm))
    if not waited:
        ref_children.append(wait if ref_moves else keep_running(wait))
    return parallel(seq(*dom_children, role="dom", arm=dom_arm), seq(*ref_children, role="ref", arm=ref_arm),
                    coordination="sequential", dom=fmt_target(o_dom), ref=fmt_target(o_ref))


def _reference_placement(dom, ref, goal, o_dom, o_ref, dom_arm, ref_arm, cond_id) -> BTNode:
    """Sequential slice where the reference arm brings its object to the dominant one.

    The reference branch performs the placement; the dominant branch keeps its
    grasp in a KeepRunningUntilSuccess loop until the shared condition holds.
    """
    shared = {"target": fmt_target(goal.target), "transform": fmt_transform(goal.transform),
              "moved": fmt_target(goal.moved), "id": cond_id}
    ref_children = []
    for p in ref:
        if p is goal:
            ref_children.append(seq(
                action("AcquirePose", ref_arm, target=shared["target"]),
                fallback(condition("AtTarget", ref_arm, **shared),
                         action("ExecuteTrajectoryTo", ref_arm,
                                **{k: shared[k] for k in ("target", "transform", "moved")})),
            ))
        elif p.action is not Action.KEEP_GRASP:
            ref_children.extend(_render(p, ref_arm))
    wait = keep_running(fallback(condition("AtTarget", dom_arm, **shared), action(
        "KeepGrasp", dom_arm, target=fmt_target(o_dom), hold="continuous")))
    dom_children, waited = [], False
    for p in dom:
        if p.action is Action.KEEP_GRASP or (p.action is Action.RELEASE and not waited):
            if not waited:
                dom_children.append(wait)
                waited = True
            if p.action is Action.KEEP_GRASP:
                continue
        dom_children.extend(_render(p, dom_arm))
    if not waited:
        dom_children.append(wait)
    return parallel(seq(*dom_children, role="dom", arm=dom_arm), seq(*ref_children, role="ref", arm=ref_arm),
                    coordination="sequential", dom=fmt_target(o_dom), ref=fmt_target(o_ref))


# --- compilation ---------------------------------------------------------------

def _runs(prims):
    return [list(g) for _, g in groupby(prims, key=lambda p: p.c.key)]


def compile_plan(prims: list[Primitive], role_map: dict | None = None, provenance: dict | None = None) -> Plan:
    """One coordination subtree per maximal run of constant coordination mode."""
    role_map = dict(role_map or DEFAULT_ROLE_MAP)
    holding = {"Right": False, "Left": False}
    subtrees = []
    for i, run in enumerate(_runs(prims)):
        c = run[0].c
        by_hand = {h: [p for p in run if p.hand == h] for h in ("Right", "Left")}
        if c.kind is ModeKind.ONE_ARM:
            stray = [p for p in run if p.hand != c.active]
            if stray:
                raise MalformedP(f"one-arm run for {c.active} contains a {stray[0].hand} primitive")
            subtrees.append(build_one_arm(run, role_map[c.active], holding[c.active]))
        elif c.kind is ModeKind.UNCOORDINATED:
            subtrees.append(build_uncoordinated(by_hand["Right"], by_hand["Left"], role_map, holding))
        elif c.kind is ModeKind.SYNCHRONOUS:
            subtrees.append(build_synchronous(run, role_map, holding))
        elif c.kind is ModeKind.SEQUENTIAL:
            dom_hand = next((p.hand for p in run if p.role == "dom"), c.dom_hand)
            ref_hand = "Left" if dom_hand == "Right" else "Right"
            dom_c = next((p.c for p in run if p.c.dom_hand == dom_hand), c)
            subtrees.append(build_sequential(by_hand[dom_hand], by_hand[ref_hand], dom_c.o_dom, dom_c.o_ref,
                                             None, dom_hand, role_map, holding, cond_id=f"seq{i}"))
        else:
            raise MalformedP(f"primitive with coordination {c.kind.value}")
        for h in ("Right", "Left"):
            holding[h] = _check_balance([p for p in run if p.hand in (h, "Both") and p.action
                                         in (Action.GRASP, Action.RELEASE)], holding[h])
    return Plan(seq(*subtrees), role_map, dict(provenance or {}))


# --- XML --------------------------------------------------------------------------

def _to_element(node: BTNode) -> ET.Element:
    if node.kind == "Decorator":
        el = ET.Element("Decorator", {"policy": node.name})
    elif node.is_leaf:
        el = ET.Element(node.kind, {"name": node.name})
    else:
        el = ET.Element(node.kind)
    if node.arm and node.is_leaf:
        el.set("arm", node.arm)
    for k, v in node.params:
        el.set(k, v)
    for c in node.children:
        el.append(_to_element(c))
    return el


def serialize(plan: Plan) -> str:
    attrs = {"version": SCHEMA_VERSION,
             "role_right": plan.role_map["Right"], "role_left": plan.role_map["Left"]}
    for k in sorted(plan.provenance):
        attrs[k] = str(plan.provenance[k])
    root = ET.Element("Plan", attrs)
    root.append(_to_element(plan.root))
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"


def _from_element(el: ET.Element) -> BTNode:
    attrs = dict(el.attrib)
    children = tuple(_from_element(c) for c in el)
    tag = el.tag
    if tag in CONTROL:
        if tag == "Parallel" and len(children) < 2:
            raise SchemaViolation("Parallel needs at least two children")
        if tag == "Fallback" and not children:
            raise SchemaViolation("Fallback needs children")
        return BTNode(tag, params=tuple(attrs.items()), children=children)
    if tag == "Decorator":
        policy = attrs.pop("policy", None)
        if policy not in DECORATOR_POLICIES:
            raise SchemaViolation(f"unknown decorator policy {policy!r}")
        if len(children) != 1:
            raise SchemaViolation("a Decorator has exactly one child")
        return BTNode("Decorator", policy, tuple(attrs.items()), children=children)
    if tag in ("Action", "Condition"):
        if children:
            raise SchemaViolation(f"{tag} nodes are leaves")
        name = attrs.pop("name", None)
        allowed = ACTIONS if tag == "Action" else CONDITIONS
        if name not in allowed:
            raise SchemaViolation(f"unknown {tag.lower()} name {name!r}")
        arm = attrs.pop("arm", "")
        if arm not in ARMS:
            raise SchemaViolation(f"bad arm {arm!r} on {name}")
        for k, v in attrs.items():
            if k == "transform" or k.startswith("offset_"):
                parse_transform(v)
        return BTNode(tag, name, tuple(attrs.items()), arm)
    raise SchemaViolation(f"unknown element <{tag}>")


def parse(xml_text: str) -> Plan:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise SchemaViolation(f"not well-formed XML: {exc}") from None
    if root.tag != "Plan":
        raise SchemaViolation("document element must be <Plan>")
    attrs = dict(root.attrib)
    if attrs.pop("version", None) != SCHEMA_VERSION:
        raise SchemaViolation(f"unsupported plan version (expected {SCHEMA_VERSION})")
    try:
        role_map = {"Right": attrs.pop("role_right"), "Left": attrs.pop("role_left")}
    except KeyError:
        raise SchemaViolation("missing role_right/role_left") from None
    if sorted(role_map.values()) != ["ArmX", "ArmY"]:
        raise SchemaViolation("role map must assign ArmX and ArmY")
    kids = list(root)
    if len(kids) != 1 or kids[0].tag != "Sequence":
        raise SchemaViolation("<Plan> must contain exactly one root <Sequence>")
    return Plan(_from_element(kids[0]), role_map, attrs)


# --- structural lint -----------------------------------------------------------------

def lint(plan: Plan) -> dict:
    """Machine-checkable structural certification of every coordination subtree."""
    counts = {"one_arm": 0, "uncoordinated": 0, "synchronous": 0, "sequential": 0}
    violations, notes = [], []
    for i, sub in enumerate(plan.subtrees):
        kind = sub.param("coordination")
        if kind not in counts:
            violations.append(f"subtree {i}: missing coordination annotation")
            continue
        counts[kind] += 1
        nodes = list(sub.walk())
        if kind == "sequential":
            n = sum(1 for x in nodes if x.kind == "Decorator" and x.name == "KeepRunningUntilSuccess")
            if n != 1:
                violations.append(f"subtree {i}: sequential with {n} KeepRunningUntilSuccess decorators")
            ids = [{x.param("id") for x in b.leaves() if x.kind == "Condition"} for b in sub.children]
            if len(sub.children) != 2 or not (ids[0] & ids[1]) - {None}:
                violations.append(f"subtree {i}: branches do not share a completion condition")
        if kind == "synchronous":
            n = sum(1 for x in nodes if x.name == "ExecCoordinatedTrajectoryTo")
            if n > 1:
                violations.append(f"subtree {i}: {n} coordinated moves")
            elif n == 0:
                notes.append(f"subtree {i}: synchronous subtree without a coordinated move")
        if kind == "uncoordinated" and sub.kind == "Parallel":
            per_branch = [{x.param("id") for x in b.leaves() if x.kind == "Condition"} - {None}
                          for b in sub.children]
            if set.intersection(*per_branch):
                violations.append(f"subtree {i}: uncoordinated branches share a condition")
        branches = sub.children if sub.kind == "Parallel" else (sub,)
        for b in branches:
            arm = b.param("arm")
            if arm is None:
                continue
            wrong = [x.name for x in b.leaves() if x.arm != arm]
            if wrong:
                violations.append(f"subtree {i}: {arm} branch has leaves for another arm ({wrong[0]})")
    return {"subtrees": counts, "violations": violations, "notes": notes, "ok": not violations}
