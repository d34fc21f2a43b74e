import dataclasses

import numpy as np
import pytest

from bimanual_plan.config import RunConfig
from bimanual_plan.dry_run import Executor, MockWorld, TickStatus, check_relations, run_to_completion, tick
from bimanual_plan.errors import GraspOutOfReach, TickBudgetExhausted, UnknownActionName
from bimanual_plan.plan import BTNode, action, condition, fallback, fmt_transform, keep_running, seq
from bimanual_plan.transforms import RigidTransform

from .conftest import scenario_plan, scenario_run

S, F, R = TickStatus.SUCCESS, TickStatus.FAILURE, TickStatus.RUNNING
ID = (1.0, 0.0, 0.0, 0.0)
# noise-free plans are checked at 1e-6: AtTarget must not stop a trajectory early
EXACT = dataclasses.replace(RunConfig(), at_target_pos_tol=1e-7, at_target_rot_tol_deg=1e-5)
SCENARIOS = ["pickplace", "dual", "cotransport", "holdplace", "pouring", "assemble"]


def pose(x, y, z):
    return RigidTransform(ID, (x, y, z))


def small_world(**kw):
    return MockWorld.from_poses({"cup": pose(0.3, 0.0, 0.0), "plate": pose(0.5, 0.0, 0.0)},
                                {"ArmX": pose(0.3, -0.05, 0.0), "ArmY": pose(0.3, 0.4, 0.0)}, **kw)


def at_plate(arm="ArmX"):
    return condition("AtTarget", arm, target="plate", transform=fmt_transform(pose(0, 0, 0.03)), moved="cup")


# --- tick semantics -----------------------------------------------------------------

def test_fallback_falls_through_to_a_succeeding_action():
    w = small_world()
    node = fallback(at_plate(), action("MotionPrimitive", "ArmX", tag="wipe"))
    assert tick(node, w) is S


def test_sequence_fails_fast():
    w = small_world()
    node = seq(action("MotionPrimitive", "ArmX", tag="first"), at_plate(),
               action("MotionPrimitive", "ArmX", tag="tail"))
    assert tick(node, w) is F
    assert [entry[3] for entry in w.log] == ["first"]


def test_decorator_runs_until_its_condition_flips():
    w = small_world()
    node = seq(action("AcquirePose", "ArmX", target="plate"), keep_running(at_plate()))
    ex = Executor(node, w)
    statuses = []
    for k in range(1, 8):
        if k == 7:
            w.objects["cup"] = pose(0.5, 0.0, 0.03)  # scripted: the condition holds from tick 7 on
        statuses.append(ex.tick())
    assert statuses == [R] * 6 + [S]


def test_conditions_never_run():
    w = small_world()
    assert tick(at_plate(), w) in (S, F)


def test_unknown_action_name():
    with pytest.raises(UnknownActionName):
        tick(BTNode("Action", "Fly", arm="ArmX"), small_world())


def test_trajectory_takes_k_ticks():
    w = small_world(trajectory_ticks=20)
    node = seq(action("AcquirePose", "ArmX", target="cup"),
               action("ExecuteTrajectoryTo", "ArmX", target="cup", transform=fmt_transform(pose(0, -0.1, 0))))
    res = run_to_completion(node, w)
    assert res.status is S and res.ticks == 20
    assert np.allclose(w.grippers["ArmX"].pose.t, [0.3, -0.1, 0.0], atol=1e-12)


def test_grasp_beyond_the_radius_is_out_of_reach():
    w = small_world()
    with pytest.raises(GraspOutOfReach):
        tick(action("Grasp", "ArmY", target="cup"), w)


def test_tick_budget():
    with pytest.raises(TickBudgetExhausted):
        run_to_completion(keep_running(at_plate()), small_world(), max_ticks=10)
    with pytest.raises(ValueError):
        run_to_completion(at_plate(), small_world(), max_ticks=0)


# --- end-to-end on synthetic scenes -------------------------------------------------

@pytest.mark.parametrize("name", SCENARIOS)
def test_noise_free_plans_reproduce_the_demonstrated_relations(name):
    _, truth, _ = scenario_run(name)
    world = MockWorld.from_scene(truth.scene, EXACT)
    res = run_to_completion(scenario_plan(name), world)
    assert res.status is S
    for r in check_relations(res.world, truth.scene["expected"], 1e-6, 1e-6):
        assert r["pass"], r


def test_co_transport_keeps_the_grippers_rigid():
    _, truth, _ = scenario_run("cotransport")
    world = MockWorld.from_scene(truth.scene, EXACT)
    run_to_completion(scenario_plan("cotransport"), world)
    steps = [entry[3] for entry in world.log if entry[2] == "CoordinatedStep"]
    assert len(steps) == EXACT.trajectory_ticks
    assert max(steps) - min(steps) <= 1e-9


def _holders(world):
    out = {}
    for arm, g in world.grippers.items():
        for obj in g.attached:
            out.setdefault(obj, []).append(arm)
    return out


@pytest.mark.parametrize("name", ["cotransport", "holdplace", "assemble"])
def test_attachments_are_conserved(name):
    _, truth, _ = scenario_run(name)
    world = MockWorld.from_scene(truth.scene, EXACT)
    names = set(world.objects)
    ex = Executor(scenario_plan(name), world)
    while ex.tick() is R:
        assert set(world.objects) == names
        for obj, arms in _holders(world).items():
            assert len(arms) <= 2
            for arm in arms:
                g = world.grippers[arm]
                assert world.objects[obj].almost_equal(g.pose.compose(g.attached[obj]), 1e-9)


def test_runs_are_deterministic():
    _, truth, _ = scenario_run("pouring")
    a = run_to_completion(scenario_plan("pouring"), MockWorld.from_scene(truth.scene, EXACT))
    b = run_to_completion(scenario_plan("pouring"), MockWorld.from_scene(truth.scene, EXACT))
    assert a.world.snapshot() == b.world.snapshot() and a.ticks == b.ticks


def test_reference_arm_holds_until_the_placement_completes():
    _, truth, _ = scenario_run("holdplace")
    world = MockWorld.from_scene(truth.scene, EXACT)
    want = RigidTransform.from_tuple7(next(r["transform"] for r in truth.relations if r["moved"] == "cover"))
    ex = Executor(scenario_plan("holdplace"), world)
    placed_at = released_at = None
    status = R
    while status is R:
        holding_cover = "cover" in world.grippers["ArmX"].attached
        status = ex.tick()
        dp, _ = world.relation("cover", "pan").distance_to(want)
        if placed_at is None and holding_cover and dp <= 1e-7:
            placed_at = ex.ticks
        if released_at is None and any(e[2] == "Release" and e[3] == "cover" for e in world.log):
            released_at = ex.ticks
        if released_at is None and world.grippers["ArmX"].attached:
            assert "pan" in world.grippers["ArmY"].attached  # reference held throughout the placement
    assert status is S
    assert placed_at is not None and released_at is not None
    assert 0 <= released_at - placed_at <= 1
