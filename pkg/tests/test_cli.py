import json

import numpy as np
import pytest

from bimanual_plan import synth
from bimanual_plan.cli import main
from bimanual_plan.config import RunConfig
from bimanual_plan.trace import write_csv

from .conftest import make_trace


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    summary = json.loads(out.out) if code in (0, 4) else None
    return code, summary, out.err


@pytest.fixture(scope="module")
def recordings(tmp_path_factory):
    root = tmp_path_factory.mktemp("rec")
    paths = {}
    for name in ("pouring", "cotransport", "holdplace"):
        trace, truth = synth.generate(synth.Scenario(synth.scenario_kind(name)))
        write_csv(trace, root / f"{name}.csv")
        (root / f"{name}.scene.json").write_text(json.dumps(truth.scene))
        paths[name] = root / f"{name}.csv"
    return root, paths


def test_analyze_writes_the_report_and_metric_series(recordings, tmp_path, capsys):
    _, paths = recordings
    code, summary, _ = run(capsys, "analyze", paths["pouring"], "--out", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    modes = [u["c"]["kind"] for u in report["units"]]
    collapsed = [m for i, m in enumerate(modes) if i == 0 or modes[i - 1] != m]
    assert collapsed == ["Sequential", "Uncoordinated", "OneArm"]
    assert (tmp_path / "metrics" / "bottle__cup__MI.csv").exists()
    assert (tmp_path / "diagnostics.jsonl").exists() and (tmp_path / "graphs.jsonl").exists()
    assert summary["config"] == RunConfig().to_dict()


def test_idle_trace_has_zero_units(tmp_path, capsys):
    n = 90
    write_csv(make_trace({"RightHand": np.zeros((n, 3)), "LeftHand": np.ones((n, 3)),
                          "cup": np.tile([0.5, 0.0, 0.0], (n, 1))}), tmp_path / "idle.csv")
    code, summary, _ = run(capsys, "analyze", tmp_path / "idle.csv", "--out", tmp_path / "out")
    assert code == 0 and summary["units"] == 0


def test_missing_file_exits_2(tmp_path, capsys):
    code, _, err = run(capsys, "analyze", tmp_path / "nope.csv", "--out", tmp_path)
    assert code == 2 and "no such file" in err


def test_corrupted_trace_exits_2(recordings, tmp_path, capsys):
    _, paths = recordings
    lines = paths["cotransport"].read_text().splitlines()
    lines[5] = lines[5].replace(",", ";", 3)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "plan", bad, "--out", tmp_path / "p.xml")
    assert code == 2 and err


def test_co_transport_plan_has_one_synchronous_subtree(recordings, tmp_path, capsys):
    _, paths = recordings
    code, summary, _ = run(capsys, "plan", paths["cotransport"], "--out", tmp_path / "p.xml")
    assert code == 0
    assert summary["lint"]["ok"] and summary["lint"]["subtrees"]["synchronous"] == 1


def test_hold_and_place_plan_has_one_decorator(recordings, tmp_path, capsys):
    _, paths = recordings
    assert run(capsys, "plan", paths["holdplace"], "--out", tmp_path / "p.xml")[0] == 0
    assert (tmp_path / "p.xml").read_text().count("KeepRunningUntilSuccess") == 1


def _plan(capsys, recordings, name, out):
    _, paths = recordings
    assert run(capsys, "plan", paths[name], "--out", out)[0] == 0
    return recordings[0] / f"{name}.scene.json"


def test_dryrun_passes_on_the_demonstration_scene(recordings, tmp_path, capsys):
    scene = _plan(capsys, recordings, "cotransport", tmp_path / "p.xml")
    code, summary, _ = run(capsys, "dryrun", "--plan", tmp_path / "p.xml", "--scene", scene,
                           "--out", tmp_path / "r.json")
    assert code == 0 and summary["pass"] and summary["status"] == "Success"
    assert json.loads((tmp_path / "r.json").read_text())["pass"]


def test_dryrun_out_of_reach_exits_4(recordings, tmp_path, capsys):
    scene = json.loads(_plan(capsys, recordings, "cotransport", tmp_path / "p.xml").read_text())
    far = synth.shift_scene(scene, {"pan": (0.0, 0.0, 1.5)})  # beyond the arms' reach
    (tmp_path / "far.json").write_text(json.dumps(far))
    code, summary, _ = run(capsys, "dryrun", "--plan", tmp_path / "p.xml", "--scene", tmp_path / "far.json")
    assert code == 4 and summary["error"] == "GraspOutOfReach" and not summary["pass"]


def test_dryrun_with_shifted_background_still_passes(recordings, tmp_path, capsys):
    scene = json.loads(_plan(capsys, recordings, "cotransport", tmp_path / "p.xml").read_text())
    shifted = synth.shift_scene(scene, {"cooker": (0.12, -0.1, 0.05)})
    (tmp_path / "s.json").write_text(json.dumps(shifted))
    code, summary, _ = run(capsys, "dryrun", "--plan", tmp_path / "p.xml", "--scene", tmp_path / "s.json",
                           "--pos-tol", "1e-6", "--rot-tol-deg", "1e-4")
    assert code == 0 and all(r["pass"] for r in summary["relations"])


def test_dryrun_bad_plan_exits_2(tmp_path, capsys):
    (tmp_path / "p.xml").write_text("<root><Oops/></root>")
    (tmp_path / "s.json").write_text("{}")
    assert run(capsys, "dryrun", "--plan", tmp_path / "p.xml", "--scene", tmp_path / "s.json")[0] == 2


def test_synth_writes_trace_truth_and_scene(tmp_path, capsys):
    code, summary, _ = run(capsys, "synth", "--scenario", "cotransport", "--seed", 7, "--noise", 0.003,
                           "--out", tmp_path / "t.csv", "--truth", tmp_path / "truth.json",
                           "--scene", tmp_path / "scene.json")
    assert code == 0 and summary["frames"] > 0
    assert json.loads((tmp_path / "truth.json").read_text())["units"] == ["Synchronous", "Synchronous"]
    first = (tmp_path / "t.csv").read_bytes()
    run(capsys, "synth", "--scenario", "cotransport", "--seed", 7, "--noise", 0.003, "--out", tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == first


def test_synth_unknown_scenario_exits_2(tmp_path, capsys):
    assert run(capsys, "synth", "--scenario", "juggling", "--out", tmp_path / "t.csv")[0] == 2


def test_metrics_command(recordings, tmp_path, capsys):
    _, paths = recordings
    code, summary, _ = run(capsys, "metrics", paths["pouring"], "--metric", "MI", "--elements", "bottle", "cup",
                           "--out", tmp_path / "mi.csv")
    assert code == 0 and summary["samples"] > 0
    assert (tmp_path / "mi.csv").read_text().splitlines()[0].startswith("t")
    assert run(capsys, "metrics", paths["pouring"], "--metric", "MI", "--elements", "bottle", "ghost",
               "--out", tmp_path / "x.csv")[0] == 2


def test_emitted_config_reproduces_the_run(recordings, tmp_path, capsys):
    _, paths = recordings
    (tmp_path / "c.toml").write_text("theta_mi = 0.3\nbins = 6\n")
    code, first, _ = run(capsys, "analyze", paths["pouring"], "--out", tmp_path / "a", "--config", tmp_path / "c.toml")
    assert code == 0 and first["config"]["theta_mi"] == 0.3 and first["config"]["bins"] == 6
    code, second, _ = run(capsys, "analyze", paths["pouring"], "--out", tmp_path / "b",
                          "--config", tmp_path / "a" / "config.toml")
    assert code == 0 and second["config_digest"] == first["config_digest"]
    assert second["modes"] == first["modes"]
    assert RunConfig.load(tmp_path / "a" / "config.toml") == RunConfig.from_mapping(first["config"])


def test_unknown_config_key_exits_2(recordings, tmp_path, capsys):
    _, paths = recordings
    (tmp_path / "c.toml").write_text("theta_mutual = 0.3\n")
    code, _, err = run(capsys, "analyze", paths["pouring"], "--out", tmp_path, "--config", tmp_path / "c.toml")
    assert code == 2 and "theta_mutual" in err
