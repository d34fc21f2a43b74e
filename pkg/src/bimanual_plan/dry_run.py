"""Tick-based behavior-tree interpreter over a kinematic mock world.

Control-node semantics:

* ``Sequence`` remembers the running child and resumes there;
* ``Fallback`` is reactive: every tick starts again from its first child and
  halts a running later child when an earlier one succeeds;
* ``Parallel`` ticks its unfinished children in document order and succeeds
  once all have succeeded (any failure fails it);
* ``KeepRunningUntilSuccess`` returns Running until its child succeeds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import GraspOutOfReach, SchemaError, TickBudgetExhausted, UnknownActionName
from .plan import BTNode, Plan, parse_transform, target_members
from .transforms import RigidTransform, relative_transform


class TickStatus(str, Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    RUNNING = "Running"


S, F, R = TickStatus.SUCCESS, TickStatus.FAILURE, TickStatus.RUNNING


@dataclass
class Gripper:
    pose: RigidTransform
    home: np.ndarray
    attached: dict = field(default_factory=dict)  # object -> pose of object in gripper frame

    @property
    def holding(self) -> bool:
        return bool(self.attached)


@dataclass
class MockWorld:
    objects: dict  # name -> RigidTransform (camera frame)
    grippers: dict  # arm -> Gripper
    grasp_radius: float = 0.10
    arm_reach: float = 1.0
    pos_tol: float = 0.01
    rot_tol_rad: float = np.deg2rad(3.0)
    trajectory_ticks: int = 20
    blackboard: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @classmethod
    def from_poses(cls, objects: dict, grippers: dict, **kw) -> "MockWorld":
        return cls(
            {k: v for k, v in objects.items()},
            {arm: Gripper(p, p.t.copy()) for arm, p in grippers.items()},
            **kw,
        )

    @classmethod
    def from_scene(cls, scene: dict, cfg=None) -> "MockWorld":
        def tf(values):
            return RigidTransform.from_tuple7(values)

        try:
            objects = {k: tf(v) for k, v in scene["objects"].items()}
            grippers = {k: tf(v) for k, v in scene["grippers"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad scene description: {exc}") from None
        kw = {}
        if cfg is not None:
            kw = dict(grasp_radius=cfg.grasp_radius, arm_reach=cfg.arm_reach, pos_tol=cfg.at_target_pos_tol,
                      rot_tol_rad=np.deg2rad(cfg.at_target_rot_tol_deg), trajectory_ticks=cfg.trajectory_ticks)
        return cls.from_poses(objects, grippers, **kw)

    def holders(self, obj: str) -> list[str]:
        return [a for a, g in self.grippers.items() if obj in g.attached]

    def set_gripper(self, arm: str, pose: RigidTransform) -> None:
        g = self.grippers[arm]
        g.pose = pose
        for obj, off in g.attached.items():
            self.objects[obj] = pose.compose(off)

    def clamp(self, arm: str, goal: RigidTransform) -> RigidTransform:
        """Project a gripper goal onto the arm's reachable sphere."""
        g = self.grippers[arm]
        d = goal.t - g.home
        n = float(np.linalg.norm(d))
        if n <= self.arm_reach:
            return goal
        return RigidTransform(goal.rotation, tuple(g.home + d * (self.arm_reach / n)))

    def relation(self, moved: str, background: str) -> RigidTransform:
        return relative_transform(self.objects[moved], self.objects[background])

    def snapshot(self) -> dict:
        return {
            "objects": {k: list(v.as_tuple7()) for k, v in sorted(self.objects.items())},
            "grippers": {
                a: {"pose": list(g.pose.as_tuple7()), "holding": sorted(g.attached)}
                for a, g in sorted(self.grippers.items())
            },
        }


def _anchor(target: str) -> str:
    return target_members(target)[0]


class Executor:
    """Ticks one plan against one world; node state is keyed by tree path."""

    def __init__(self, plan: Plan | BTNode, world: MockWorld):
        self.root = plan.root if isinstance(plan, Plan) else plan
        self.world = world
        self.state: dict = {}
        self.ticks = 0

    # bookkeeping
    def _reset(self, path: tuple) -> None:
        n = len(path)
        for key in [k for k in self.state if k[:n] == path]:
            del self.state[key]

    def tick(self) -> TickStatus:
        self.ticks += 1
        return self._tick(self.root, ())

    def _tick(self, node: BTNode, path: tuple) -> TickStatus:
        kind = node.kind
        if kind == "Sequence":
            i = self.state.get(path, 0)
            while i < len(node.children):
                st = self._tick(node.children[i], path + (i,))
                if st is R:
                    self.state[path] = i
                    return R
                if st is F:
                    self._reset(path)
                    return F
                i += 1
            self._reset(path)
            return S
        if kind == "Fallback":
            for i, child in enumerate(node.children):
                st = self._tick(child, path + (i,))
                if st is F:
                    continue
                if st is S:
                    self._reset(path)
                return st
            self._reset(path)
            return F
        if kind == "Parallel":
            done = self.state.setdefault(path, set())
            for i, child in enumerate(node.children):
                if i in done:
                    continue
                st = self._tick(child, path + (i,))
                if st is F:
                    self._reset(path)
                    return F
                if st is S:
                    done.add(i)
            if len(done) == len(node.children):
                self._reset(path)
                return S
            return R
        if kind == "Decorator":
            if node.name != "KeepRunningUntilSuccess":
                raise UnknownActionName(f"unknown decorator {node.name!r}")
            st = self._tick(node.children[0], path + (0,))
            if st is S:
                self._reset(path)
                return S
            if st is F:
                self._reset(path + (0,))
            return R
        if kind == "Condition":
            return self._condition(node)
        if kind == "Action":
            return self._action(node, path)
        raise UnknownActionName(f"unknown node kind {kind!r}")

    # leaves
    def _goal(self, node: BTNode) -> RigidTransform | None:
        ref = self.world.blackboard.get(node.param("target"))
        if ref is None:
            return None
        return ref.compose(parse_transform(node.param("transform")))

    def _condition(self, node: BTNode) -> TickStatus:
        if node.name != "AtTarget":
            raise UnknownActionName(f"unknown condition {node.name!r}")
        goal = self._goal(node)
        if goal is None:
            return F
        moved = node.param("moved")
        if moved is not None:
            actual = self.world.objects.get(_anchor(moved))
        else:
            g = self.world.grippers.get(node.arm)
            actual = g.pose if g else None
        if actual is None:
            return F
        dp, da = actual.distance_to(goal)
        return S if dp <= self.world.pos_tol and da <= self.world.rot_tol_rad else F

    def _action(self, node: BTNode, path: tuple) -> TickStatus:
        w = self.world
        name = node.name
        arm = node.arm
        if name == "AcquirePose":
            obj = w.objects.get(_anchor(node.param("target")))
            if obj is None:
                return F
            w.blackboard[node.param("target")] = obj
            return S
        if name == "ExecuteTrajectoryTo":
            return self._trajectory(node, path)
        if name == "ExecCoordinatedTrajectoryTo":
            return self._coordinated(node, path)
        if name == "Grasp":
            g = w.grippers[arm]
            members = target_members(node.param("target"))
            if g.holding or any(m not in w.objects for m in members):
                return F
            dist = min(float(np.linalg.norm(w.objects[m].t - g.pose.t)) for m in members)
            if dist > w.grasp_radius:
                raise GraspOutOfReach(f"{arm} is {dist:.3f} m from {node.param('target')}")
            inv = g.pose.inverse()
            for m in members:
                g.attached[m] = inv.compose(w.objects[m])
            w.log.append((self.ticks, arm, "Grasp", node.param("target")))
            return S
        if name == "Release":
            g = w.grippers[arm]
            members = target_members(node.param("target"))
            if not any(m in g.attached for m in members):
                return F
            for m in members:
                g.attached.pop(m, None)
            w.log.append((self.ticks, arm, "Release", node.param("target")))
            return S
        if name == "KeepGrasp":
            g = w.grippers[arm]
            members = target_members(node.param("target"))
            if not any(m in g.attached for m in members):
                return F
            return R if node.param("hold", "check") == "continuous" else S
        if name == "MotionPrimitive":
            w.log.append((self.ticks, arm, "MotionPrimitive", node.param("tag")))
            return S
        raise UnknownActionName(f"unknown action {name!r}")

    def _trajectory(self, node: BTNode, path: tuple) -> TickStatus:
        w = self.world
        g = w.grippers[node.arm]
        st = self.state.get(path)
        if st is None:
            goal = self._goal(node)
            if goal is None:
                return F
            moved = node.param("moved")
            if moved is not None:
                anchor = _anchor(moved)
                if anchor not in g.attached or len(w.holders(anchor)) > 1:
                    return F
                # gripper goal that puts the held object at ``goal``
                goal = goal.compose(g.attached[anchor].inverse())
            st = self.state[path] = {"start": g.pose, "goal": w.clamp(node.arm, goal), "i": 0}
        st["i"] += 1
        k = w.trajectory_ticks
        pose = st["goal"] if st["i"] >= k else st["start"].interpolate(st["goal"], st["i"] / k)
        w.set_gripper(node.arm, pose)
        if st["i"] >= k:
            del self.state[path]
            return S
        return R

    def _coordinated(self, node: BTNode, path: tuple) -> TickStatus:
        w = self.world
        st = self.state.get(path)
        if st is None:
            goal = self._goal(node)
            moved = node.param("moved")
            anchor = _anchor(moved)
            members = target_members(moved)
            arms = [a for a, g in w.grippers.items() if any(m in g.attached for m in members)]
            if goal is None or len(arms) != 2:
                return F
            start = w.objects[anchor]
            inv = start.inverse()
            # gripper offsets observed in the world when the move starts
            offsets = {a: inv.compose(w.grippers[a].pose) for a in arms}
            for a in arms:
                end = goal.compose(offsets[a])
                if float(np.linalg.norm(end.t - w.grippers[a].home)) > w.arm_reach:
                    return F
            st = self.state[path] = {"start": start, "goal": goal, "offsets": offsets, "i": 0}
        st["i"] += 1
        k = w.trajectory_ticks
        obj = st["goal"] if st["i"] >= k else st["start"].interpolate(st["goal"], st["i"] / k)
        for a, off in st["offsets"].items():
            w.set_gripper(a, obj.compose(off))
        w.log.append((self.ticks, "Both", "CoordinatedStep",
                      float(np.linalg.norm(w.grippers["ArmX"].pose.t - w.grippers["ArmY"].pose.t))))
        if st["i"] >= k:
            del self.state[path]
            return S
        return R


def tick(plan: Plan | BTNode, world: MockWorld, executor: Executor | None = None) -> TickStatus:
    """Single tick of a fresh (or supplied) executor."""
    return (executor or Executor(plan, world)).tick()


@dataclass(frozen=True)
class RunResult:
    world: MockWorld
    status: TickStatus
    ticks: int


def run_to_completion(plan: Plan | BTNode, world: MockWorld, max_ticks: int = 5000) -> RunResult:
    if max_ticks <= 0:
        raise ValueError("max_ticks must be positive")
    ex = Executor(plan, world)
    for _ in range(max_ticks):
        st = ex.tick()
        if st is not R:
            return RunResult(world, st, ex.ticks)
    raise TickBudgetExhausted(f"plan still running after {max_ticks} ticks")


def check_relations(world: MockWorld, expected: list[dict], pos_tol: float, rot_tol_rad: float) -> list[dict]:
    """Compare final object-in-background poses against expected relations."""
    out = []
    for rel in expected:
        want = RigidTransform.from_tuple7(rel["transform"])
        moved = _anchor(rel["moved"]) if "+" in rel["moved"] else rel["moved"]
        got = world.relation(moved, rel["background"])
        dp, da = got.distance_to(want)
        out.append({
            "moved": rel["moved"],
            "background": rel["background"],
            "pos_err_m": dp,
            "rot_err_rad": da,
            "pass": bool(dp <= pos_tol and da <= rot_tol_rad),
        })
    return out


def load_scene(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SchemaError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None
