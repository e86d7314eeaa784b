import json
import os
import subprocess

import pytest

import vas


def test_aggregate():
    assert vas.aggregate([0.9, 0.4, 0.8]) == pytest.approx((0.9 * 0.4 * 0.8) ** (1 / 3))
    assert vas.aggregate([0.9, 0.4, 0.8], "arithmetic") == pytest.approx(0.7)
    with pytest.raises(vas.VasError) as err:
        vas.aggregate([])
    assert err.value.kind == "invalid-input"


def test_windows():
    assert vas.gtou((30, 60), (10, 40)) == pytest.approx(0.6)
    assert vas.gtou((12, 20), (10, 40)) == 1.0
    assert vas.iou((0, 10), (0, 10)) == 1.0
    clips = vas.segment(125)
    assert clips == [(0, 60), (60, 120), (120, 125)]
    assert vas.child_windows((0, 60)) == [(0, 20), (20, 40), (40, 60)]
    assert vas.child_windows((20, 40), level=2)[0] == (20, 25)
    with pytest.raises(vas.VasError):
        vas.child_windows((20, 25), level=3)
    assert vas.sample_timestamps((0, 10), 5) == pytest.approx([1, 3, 5, 7, 9])


def test_calibration():
    rep = vas.calibration_report([0.95] * 20 + [0.5] * 80, [i < 18 for i in range(20)] + [True, False] * 40)
    assert rep["ace"] >= 0
    assert len(rep["bins"]) == 10


def test_simulated_ask():
    world = vas.generate_world(7)
    assert world["question"]["video_id"] == "sim-7"
    out = vas.simulate_ask(world)
    rec = out["record"]
    assert rec["ok"]
    assert rec["answer"] == world["question"]["gt_answer"]
    assert rec["vlm_calls"] <= 45
    assert vas.simulate_ask(world, agent="falconeye-flash")["record"]["vlm_calls"] <= 10


def test_simulated_bench():
    rep = vas.simulate_bench(1, 4, agent="sequential")
    assert rep["overall"]["n"] == 4
    assert rep["overall"]["mean_vlm_calls"] == 60


@pytest.mark.skipif(not os.environ.get("VAS_CLI"), reason="CLI path not provided")
def test_cli_simulate(tmp_path):
    cli = os.environ["VAS_CLI"]
    subprocess.run([cli, "--log-level", "warn", "simulate", str(tmp_path / "ds"), "--n", "2"], check=True)
    lines = (tmp_path / "ds" / "questions.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["video_path"].startswith("sim://")
