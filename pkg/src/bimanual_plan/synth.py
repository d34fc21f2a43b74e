"""Synthetic bimanual demonstrations with ground truth.

Each scenario is a short script of minimum-jerk segments.  A segment drives
one element along a path while any number of followers keep their rigid
offset to it, which is how carried objects and grasping hands move together.
Ground truth (coordination labels, expected units and primitives, final
object relations and a dry-run scene) is written alongside the script, not
derived from the analysis pipeline.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .trace import ElementId, ElementKind, Stream, Trace
from .transforms import RigidTransform, _from_scipy, _to_scipy, canonical_quat, relative_transform

RIGHT, LEFT = "RightHand", "LeftHand"
D_HO = 0.10  # hand-object proximity used to time the end of a hold in the truth track
D_OO = 0.05


class ScenarioKind(str, Enum):
    PICK_PLACE_ONE_ARM = "PickPlaceOneArm"
    DUAL_UNCOORDINATED = "DualUncoordinated"
    CO_TRANSPORT_SYNC = "CoTransportSync"
    HOLD_AND_PLACE_SEQUENTIAL = "HoldAndPlaceSequential"
    POURING_LIKE = "PouringLike"
    ASSEMBLE_THEN_CO_TRANSPORT = "AssembleThenCoTransport"


ALIASES = {
    "pickplace": ScenarioKind.PICK_PLACE_ONE_ARM,
    "dual": ScenarioKind.DUAL_UNCOORDINATED,
    "cotransport": ScenarioKind.CO_TRANSPORT_SYNC,
    "holdplace": ScenarioKind.HOLD_AND_PLACE_SEQUENTIAL,
    "pouring": ScenarioKind.POURING_LIKE,
    "assemble": ScenarioKind.ASSEMBLE_THEN_CO_TRANSPORT,
}


def scenario_kind(name: str) -> ScenarioKind:
    key = name.strip()
    if key.lower() in ALIASES:
        return ALIASES[key.lower()]
    try:
        return ScenarioKind(key)
    except ValueError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(ALIASES)}") from None


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    noise_pos: float = 0.0  # meters (std of per-axis Gaussian)
    noise_rot: float = 0.0  # radians (std of per-axis rotation-vector noise)
    seed: int = 0
    rate_hz: float = 30.0


@dataclass
class GroundTruth:
    scenario: str
    labels: list  # [(t_start, t_end, label)]; frames outside every interval are idle
    units: list  # expected per-unit coordination labels, in order
    primitives: list  # expected P as [c, action, hand, target]
    subtrees: list  # expected coordination of the compiled subtrees, in order
    relations: list  # [{"moved", "background", "transform"}] final demonstrated relations
    scene: dict  # dry-run start state: objects and grippers
    dominant: dict = field(default_factory=dict)  # o_dom / o_ref in Sequential phases

    def label_at(self, t: float) -> str | None:
        for a, b, lab in self.labels:
            if a <= t < b:
                return lab
        return None

    def collapsed_labels(self) -> list[str]:
        out = []
        for _, _, lab in self.labels:
            kind = lab.split("(")[0]
            if not out or out[-1] != kind:
                out.append(kind)
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "GroundTruth":
        data = json.loads(Path(path).read_text())
        data["labels"] = [tuple(x) for x in data["labels"]]
        return cls(**data)


def min_jerk(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s * s)


def yaw(deg: float) -> tuple:
    return tuple(_from_scipy(Rotation.from_euler("z", deg, degrees=True)))


class _Sim:
    """Frame-stepping kinematic script: segments are added in start-time order."""

    def __init__(self, rate_hz: float, duration_s: float, init: dict):
        self.rate = rate_hz
        self.n = int(round(duration_s * rate_hz)) + 1
        self.t = np.arange(self.n) / rate_hz
        self.cur = {k: RigidTransform(q, p) for k, (p, q) in init.items()}
        self.pos = {k: np.zeros((self.n, 3)) for k in init}
        self.quat = {k: np.zeros((self.n, 4)) for k in init}
        self.k = 0
        self.active: list = []

    def frame(self, t: float) -> int:
        return int(round(t * self.rate))

    def _fill_to(self, k_end: int) -> None:
        for k in range(self.k, min(k_end, self.n)):
            for seg in self.active:
                k0, k1, driver, fn, start, offsets = seg
                if k0 <= k <= k1:
                    s = (k - k0) / max(k1 - k0, 1)
                    pose = fn(s, start)
                    self.cur[driver] = pose
                    for f, off in offsets.items():
                        self.cur[f] = pose.compose(off)
            self.active = [s for s in self.active if s[1] > k]
            for name, pose in self.cur.items():
                self.pos[name][k] = pose.translation
                self.quat[name][k] = pose.rotation
        self.k = max(self.k, min(k_end, self.n))

    def path(self, driver: str, t0: float, t1: float, fn, followers=()) -> None:
        k0, k1 = self.frame(t0), self.frame(t1)
        self._fill_to(k0)
        start = self.cur[driver]
        inv = start.inverse()
        offsets = {f: inv.compose(self.cur[f]) for f in followers}
        self.active.append((k0, k1, driver, fn, start, offsets))

    def move(self, driver: str, t0: float, t1: float, pos=None, quat=None, followers=()) -> None:
        self._fill_to(self.frame(t0))
        cur = self.cur[driver]
        goal = RigidTransform(quat if quat is not None else cur.rotation,
                              pos if pos is not None else cur.translation)
        self.path(driver, t0, t1, lambda s, p0: p0.interpolate(goal, float(min_jerk(s))), followers)

    def orbit(self, driver: str, center: str, t0: float, t1: float, amp_deg: float, periods: float,
              followers=()) -> None:
        """Swing ``driver`` about the vertical axis through ``center`` with a sinusoidal angle."""
        self._fill_to(self.frame(t0))
        c = self.cur[center].t

        def fn(s, p0):
            r = Rotation.from_euler("z", amp_deg * np.sin(2 * np.pi * periods * s), degrees=True)
            q = _from_scipy(r * _to_scipy(p0.rotation))
            return RigidTransform(tuple(q), tuple(c + r.apply(p0.t - c)))

        self.path(driver, t0, t1, fn, followers)

    def at(self, name: str, t: float) -> RigidTransform:
        """Pose of ``name`` at time ``t`` (after :meth:`finish`)."""
        k = self.frame(t)
        return RigidTransform(tuple(self.quat[name][k]), tuple(self.pos[name][k]))

    def finish(self) -> None:
        self._fill_to(self.n)

    def crossing(self, a: str, b: str, thresh: float, after: float) -> float:
        """First time after ``after`` at which the a-b distance reaches ``thresh``."""
        d = np.linalg.norm(self.pos[a] - self.pos[b], axis=1)
        k0 = self.frame(after)
        idx = np.flatnonzero(d[k0:] >= thresh)
        return float(self.t[k0 + idx[0]]) if idx.size else float(self.t[-1])


def _p(*v):
    return np.array(v, dtype=float)


HAND_Q_R = yaw(-30.0)
HAND_Q_L = yaw(30.0)
I = (1.0, 0.0, 0.0, 0.0)


def _init(objects: dict, right=(0.15, -0.40, 0.25), left=(0.15, 0.40, 0.25)) -> dict:
    init = {RIGHT: (_p(*right), HAND_Q_R), LEFT: (_p(*left), HAND_Q_L)}
    for name, pos in objects.items():
        init[name] = (_p(*pos), I)
    return init


# --- scenario scripts ----------------------------------------------------------
# Each returns (sim, labels, units, primitives, subtrees, placements, dominant).

def _pick_place():
    objs = {"cup1": (0.30, -0.20, 0.05), "plate1": (0.55, -0.25, 0.0),
            "cup2": (0.30, 0.20, 0.05), "plate2": (0.55, 0.25, 0.0)}
    sim = _Sim(30.0, 21.0, _init(objs))
    above = _p(0, 0, 0.03)
    sim.move(RIGHT, 1.0, 2.5, pos=_p(*objs["cup1"]) + _p(0, -0.05, 0.0))
    sim.move("cup1", 3.0, 5.0, pos=_p(*objs["plate1"]) + above, followers=[RIGHT])
    sim.move(RIGHT, 9.0, 10.5, pos=_p(0.15, -0.40, 0.25))
    sim.move(LEFT, 10.5, 12.0, pos=_p(*objs["cup2"]) + _p(0, 0.05, 0.0))
    sim.move("cup2", 12.5, 14.5, pos=_p(*objs["plate2"]) + above, followers=[LEFT])
    sim.move(LEFT, 18.5, 20.0, pos=_p(0.15, 0.40, 0.25))
    sim.finish()
    labels = [(3.0, sim.crossing(RIGHT, "cup1", D_HO, 9.0), "OneArm(Right)"),
              (12.5, sim.crossing(LEFT, "cup2", D_HO, 18.5), "OneArm(Left)")]
    units = ["OneArm(Right)", "OneArm(Right)", "OneArm(Left)", "OneArm(Left)"]
    prims = [["OneArm(Right)", "Move", "Right", "cup1"], ["OneArm(Right)", "Grasp", "Right", "cup1"],
             ["OneArm(Right)", "Move(OO)", "Right", "plate1"], ["OneArm(Right)", "Release", "Right", "cup1"],
             ["OneArm(Left)", "Move", "Left", "cup2"], ["OneArm(Left)", "Grasp", "Left", "cup2"],
             ["OneArm(Left)", "Move(OO)", "Left", "plate2"], ["OneArm(Left)", "Release", "Left", "cup2"]]
    return sim, labels, units, prims, ["one_arm", "one_arm"], [("cup1", "plate1"), ("cup2", "plate2")], {}


def _dual():
    objs = {"profile1": (0.35, -0.20, 0.02), "ink1": (0.60, -0.30, 0.0),
            "profile2": (0.35, 0.20, 0.02), "ink2": (0.60, 0.30, 0.0)}
    sim = _Sim(30.0, 11.5, _init(objs))
    above = _p(0, 0, 0.03)
    sim.move(RIGHT, 1.0, 2.5, pos=_p(*objs["profile1"]) + _p(0, -0.05, 0.0))
    sim.move(LEFT, 1.0, 2.5, pos=_p(*objs["profile2"]) + _p(0, 0.05, 0.0))
    sim.move("profile1", 3.0, 5.0, pos=_p(*objs["ink1"]) + above, followers=[RIGHT])
    sim.move("profile2", 3.0, 5.0, pos=_p(*objs["ink2"]) + above, followers=[LEFT])
    sim.move(RIGHT, 9.0, 10.5, pos=_p(0.15, -0.40, 0.25))
    sim.move(LEFT, 9.0, 10.5, pos=_p(0.15, 0.40, 0.25))
    sim.finish()
    end = max(sim.crossing(RIGHT, "profile1", D_HO, 9.0), sim.crossing(LEFT, "profile2", D_HO, 9.0))
    labels = [(3.0, end, "Uncoordinated")]
    units = ["Uncoordinated", "Uncoordinated"]
    c = "Uncoordinated"
    prims = [[c, "Move", "Right", "profile1"], [c, "Grasp", "Right", "profile1"],
             [c, "Move", "Left", "profile2"], [c, "Grasp", "Left", "profile2"],
             [c, "Move(OO)", "Right", "ink1"], [c, "Move(OO)", "Left", "ink2"],
             [c, "Release", "Right", "profile1"], [c, "Release", "Left", "profile2"]]
    return sim, labels, units, prims, ["uncoordinated"], [("profile1", "ink1"), ("profile2", "ink2")], {}


def _cotransport():
    objs = {"pan": (0.40, 0.0, 0.05), "cooker": (0.45, 0.35, 0.0)}
    sim = _Sim(30.0, 12.0, _init(objs))
    pan = _p(*objs["pan"])
    sim.move(RIGHT, 1.0, 2.5, pos=pan + _p(0, -0.08, 0.02))
    sim.move(LEFT, 1.0, 2.5, pos=pan + _p(0, 0.08, 0.02))
    sim.move("pan", 3.0, 5.5, pos=_p(*objs["cooker"]) + _p(0, 0, 0.03), followers=[RIGHT, LEFT])
    # mirror-image retreats so both hands leave the handles together
    pan_end = _p(*objs["cooker"]) + _p(0, 0, 0.03)
    sim.move(RIGHT, 9.5, 11.0, pos=pan_end + _p(-0.25, -0.30, 0.20))
    sim.move(LEFT, 9.5, 11.0, pos=pan_end + _p(-0.25, 0.30, 0.20))
    sim.finish()
    end = max(sim.crossing(RIGHT, "pan", D_HO, 9.5), sim.crossing(LEFT, "pan", D_HO, 9.5))
    labels = [(3.0, end, "Synchronous")]
    c = "Synchronous"
    prims = [[c, "Move", "Right", "pan"], [c, "Grasp", "Right", "pan"],
             [c, "Move", "Left", "pan"], [c, "Grasp", "Left", "pan"],
             [c, "Move(OO)", "Both", "cooker"],
             [c, "Release", "Right", "pan"], [c, "Release", "Left", "pan"]]
    return sim, labels, [c, c], prims, ["synchronous"], [("pan", "cooker")], {}


def _hold_and_place():
    objs = {"pan": (0.30, 0.25, 0.05), "cooker": (0.50, 0.0, 0.0), "cover": (0.30, -0.30, 0.05)}
    sim = _Sim(30.0, 22.5, _init(objs))
    pan_goal = _p(*objs["cooker"]) + _p(0, 0, 0.03)
    sim.move(LEFT, 1.0, 2.5, pos=_p(*objs["pan"]) + _p(0, 0.08, 0.0))
    sim.move("pan", 3.0, 5.5, pos=pan_goal, followers=[LEFT])
    sim.move(RIGHT, 6.5, 8.0, pos=_p(*objs["cover"]) + _p(0, -0.06, 0.0))
    sim.move("cover", 8.5, 10.0, pos=pan_goal + _p(-0.08, -0.06, 0.10), followers=[RIGHT])
    sim.move("cover", 10.0, 11.0, pos=pan_goal + _p(0, 0, 0.03), followers=[RIGHT])
    sim.move(RIGHT, 15.0, 16.5, pos=_p(0.15, -0.40, 0.25))
    sim.move(LEFT, 20.0, 21.5, pos=_p(0.15, 0.40, 0.25))
    sim.finish()
    r_off = sim.crossing(RIGHT, "cover", D_HO, 15.0)
    labels = [(3.0, 8.5, "OneArm(Left)"), (8.5, 11.0, "Uncoordinated"), (11.0, r_off, "Sequential"),
              (r_off, sim.crossing(LEFT, "pan", D_HO, 20.0), "OneArm(Left)")]
    units = ["OneArm(Left)", "OneArm(Left)", "Uncoordinated", "Sequential", "OneArm(Left)"]
    seq = "Sequential(dom=Right)"
    prims = [["OneArm(Left)", "Move", "Left", "pan"], ["OneArm(Left)", "Grasp", "Left", "pan"],
             ["OneArm(Left)", "Move(OO)", "Left", "cooker"],
             ["Uncoordinated", "Move", "Right", "cover"], ["Uncoordinated", "Grasp", "Right", "cover"],
             ["Uncoordinated", "KeepGrasp", "Left", "pan"],
             [seq, "Move(OO)", "Right", "pan"], [seq, "KeepGrasp", "Left", "pan"],
             [seq, "Release", "Right", "cover"],
             ["OneArm(Left)", "Release", "Left", "pan"]]
    subtrees = ["one_arm", "uncoordinated", "sequential", "one_arm"]
    return sim, labels, units, prims, subtrees, [("pan", "cooker"), ("cover", "pan")], \
        {"o_dom": "cover", "o_ref": "pan"}


def _pouring():
    cup0 = _p(0.40, -0.05, 0.05)
    objs = {"cup": tuple(cup0), "bottle": tuple(cup0 + _p(0.04, 0, 0)),
            "coaster": (0.55, -0.30, 0.0), "shelf": (0.30, 0.45, 0.20)}
    sim = _Sim(30.0, 28.5, _init(objs))
    sim.move(RIGHT, 1.0, 2.5, pos=cup0 + _p(-0.08, 0, 0))
    sim.move(LEFT, 1.0, 2.5, pos=cup0 + _p(0.11, 0, 0))
    # lift together, then swirl the bottle about the cup's axis
    sim.move("cup", 3.0, 4.5, pos=cup0 + _p(0, 0, 0.15), followers=[RIGHT, "bottle", LEFT])
    sim.orbit("bottle", "cup", 4.5, 8.5, 45.0, 2.0, followers=[LEFT])
    sim.move("bottle", 8.5, 10.5, pos=_p(0.40, 0.25, 0.05), followers=[LEFT])
    sim.move(LEFT, 11.0, 12.5, pos=_p(0.15, 0.40, 0.25))
    sim.move("cup", 12.5, 15.0, pos=_p(0.25, -0.25, 0.45), followers=[RIGHT])
    sim.move("cup", 15.5, 17.5, pos=_p(*objs["coaster"]) + _p(0, 0, 0.03), followers=[RIGHT])
    sim.move(RIGHT, 19.0, 20.5, pos=_p(0.15, -0.40, 0.25))
    sim.move(LEFT, 20.5, 22.0, pos=_p(0.40, 0.25, 0.05) + _p(0, 0.07, 0))
    sim.move("bottle", 22.5, 24.5, pos=_p(*objs["shelf"]) + _p(0, 0, 0.03), followers=[LEFT])
    sim.move(LEFT, 26.0, 27.5, pos=_p(0.15, 0.40, 0.25))
    sim.finish()
    seq_end = sim.crossing("bottle", "cup", D_OO, 8.5)
    l_off = sim.crossing(LEFT, "bottle", D_HO, 11.0)
    labels = [(3.0, seq_end, "Sequential"), (seq_end, l_off, "Uncoordinated"),
              (l_off, sim.crossing(RIGHT, "cup", D_HO, 19.0), "OneArm(Right)"),
              (22.5, sim.crossing(LEFT, "bottle", D_HO, 26.0), "OneArm(Left)")]
    units = ["Sequential", "Uncoordinated", "OneArm(Right)", "OneArm(Right)", "OneArm(Left)", "OneArm(Left)"]
    seq = "Sequential(dom=Left)"
    prims = [[seq, "Move", "Right", "cup"], [seq, "Grasp", "Right", "cup"],
             [seq, "Move", "Left", "bottle"], [seq, "Grasp", "Left", "bottle"],
             [seq, "Move(OO)", "Left", "cup"],
             ["Uncoordinated", "KeepGrasp", "Right", "cup"], ["Uncoordinated", "Release", "Left", "bottle"],
             ["OneArm(Right)", "Move(OO)", "Right", "coaster"], ["OneArm(Right)", "Release", "Right", "cup"],
             ["OneArm(Left)", "Move", "Left", "bottle"], ["OneArm(Left)", "Grasp", "Left", "bottle"],
             ["OneArm(Left)", "Move(OO)", "Left", "shelf"], ["OneArm(Left)", "Release", "Left", "bottle"]]
    subtrees = ["sequential", "uncoordinated", "one_arm", "one_arm"]
    return sim, labels, units, prims, subtrees, [("cup", "coaster"), ("bottle", "shelf")], \
        {"o_dom": "bottle", "o_ref": "cup"}


def _assemble():
    objs = {"joint": (0.35, -0.25, 0.05), "profile": (0.30, 0.30, 0.05), "scale": (0.60, 0.15, 0.0)}
    sim = _Sim(30.0, 25.5, _init(objs))
    station = _p(0.45, 0.0, 0.10)
    sim.move(RIGHT, 1.0, 2.5, pos=_p(*objs["joint"]) + _p(0, -0.05, 0))
    sim.move("joint", 3.0, 5.0, pos=station, followers=[RIGHT])
    sim.move(LEFT, 7.5, 9.0, pos=_p(*objs["profile"]) + _p(0, 0.05, 0))
    sim.move("profile", 9.5, 12.0, pos=station + _p(0.03, 0, 0), followers=[LEFT])
    # align the profile against the joint by swinging it about the joint's axis
    sim.orbit("profile", "joint", 12.2, 13.8, 45.0, 1.0, followers=[LEFT])
    sim.move("joint", 14.0, 16.5, pos=_p(*objs["scale"]) + _p(0, 0, 0.03), followers=[RIGHT, LEFT, "profile"])
    # hands sit point-symmetric about the assembly's center; retreat the same way
    center = _p(*objs["scale"]) + _p(0.015, 0, 0.03)
    sim.move(RIGHT, 22.0, 23.5, pos=center + _p(-0.30, -0.40, 0.20))
    sim.move(LEFT, 22.0, 23.5, pos=center + _p(0.30, 0.40, 0.20))
    sim.finish()
    end = max(sim.crossing(RIGHT, "joint", D_HO, 22.0), sim.crossing(LEFT, "profile", D_HO, 22.0))
    labels = [(3.0, 9.5, "OneArm(Right)"), (9.5, 12.0, "Uncoordinated"), (12.0, 14.0, "Sequential"),
              (14.0, end, "Synchronous")]
    units = ["OneArm(Right)", "Uncoordinated", "Sequential", "Synchronous", "Synchronous"]
    seq = "Sequential(dom=Left)"
    u = "joint+profile"
    prims = [["OneArm(Right)", "Move", "Right", "joint"], ["OneArm(Right)", "Grasp", "Right", "joint"],
             ["Uncoordinated", "Move", "Left", "profile"], ["Uncoordinated", "Grasp", "Left", "profile"],
             ["Uncoordinated", "KeepGrasp", "Right", "joint"],
             [seq, "Move(OO)", "Left", "joint"], [seq, "KeepGrasp", "Right", "joint"],
             ["Synchronous", "Move(OO)", "Both", "scale"],
             ["Synchronous", "Release", "Right", u], ["Synchronous", "Release", "Left", u]]
    subtrees = ["one_arm", "uncoordinated", "sequential", "synchronous"]
    return sim, labels, units, prims, subtrees, [("profile", "joint"), ("joint", "scale")], \
        {"o_dom": "profile", "o_ref": "joint"}


SCRIPTS = {
    ScenarioKind.PICK_PLACE_ONE_ARM: _pick_place,
    ScenarioKind.DUAL_UNCOORDINATED: _dual,
    ScenarioKind.CO_TRANSPORT_SYNC: _cotransport,
    ScenarioKind.HOLD_AND_PLACE_SEQUENTIAL: _hold_and_place,
    ScenarioKind.POURING_LIKE: _pouring,
    ScenarioKind.ASSEMBLE_THEN_CO_TRANSPORT: _assemble,
}


def _noisy(pos: np.ndarray, quat: np.ndarray, sc: Scenario, rng: np.random.Generator):
    if sc.noise_pos > 0:
        pos = pos + rng.normal(0.0, sc.noise_pos, pos.shape)
    if sc.noise_rot > 0:
        jitter = Rotation.from_rotvec(rng.normal(0.0, sc.noise_rot, (len(quat), 3)))
        quat = _from_scipy(jitter * _to_scipy(quat))
    return pos, canonical_quat(quat)


def generate(scenario: Scenario) -> tuple[Trace, GroundTruth]:
    """Trace on the scenario's grid plus script-derived ground truth."""
    if scenario.noise_pos < 0 or scenario.noise_rot < 0:
        raise ValueError("noise levels must be non-negative")
    if abs(scenario.rate_hz - 30.0) > 1e-12:
        raise ValueError("scenario scripts are authored at 30 Hz")
    sim, labels, units, prims, subtrees, placements, dominant = SCRIPTS[scenario.kind]()
    rng = np.random.default_rng(scenario.seed)
    elements, streams = {}, {}
    for name in sorted(sim.pos):
        kind = ElementKind.HAND_RIGHT if name == RIGHT else ElementKind.HAND_LEFT if name == LEFT \
            else ElementKind.OBJECT
        elements[name] = ElementId(name, kind)
        pos, quat = _noisy(sim.pos[name], sim.quat[name], scenario, rng)
        streams[name] = Stream(sim.t.copy(), pos, quat)
    trace = Trace(elements, streams, rate_hz=scenario.rate_hz, source=f"synth:{scenario.kind.value}",
                  meta={"seed": scenario.seed, "noise_pos": scenario.noise_pos, "noise_rot": scenario.noise_rot})

    t_end = float(sim.t[-1])
    relations = []
    for moved, bkg in placements:
        rel = relative_transform(sim.at(moved, t_end), sim.at(bkg, t_end))
        relations.append({"moved": moved, "background": bkg, "transform": list(rel.as_tuple7())})
    scene = {
        "objects": {n: list(sim.at(n, 0.0).as_tuple7()) for n in sorted(sim.pos) if n not in (RIGHT, LEFT)},
        "grippers": {"ArmX": list(sim.at(RIGHT, 0.0).as_tuple7()), "ArmY": list(sim.at(LEFT, 0.0).as_tuple7())},
        "expected": relations,
    }
    truth = GroundTruth(scenario.kind.value, [(float(a), float(b), lab) for a, b, lab in labels],
                        units, prims, subtrees, relations, scene, dominant)
    return trace, truth


def shift_scene(scene: dict, offsets: dict) -> dict:
    """Copy of a dry-run scene with some objects translated by the given offsets."""
    out = json.loads(json.dumps(scene))
    for name, off in offsets.items():
        pose = out["objects"][name]
        out["objects"][name] = [pose[0] + off[0], pose[1] + off[1], pose[2] + off[2], *pose[3:]]
    return out


def background_only(truth: GroundTruth) -> list[str]:
    """Objects that serve only as placement references, never get moved."""
    moved = {r["moved"].split("+")[0] for r in truth.relations}
    held = {p[3] for p in truth.primitives if p[1] in ("Grasp", "Release")}
    held = {m for t in held for m in t.split("+")}
    return sorted({r["background"] for r in truth.relations} - moved - held)
