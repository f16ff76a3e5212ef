"""Smoke tests for the pybind11 module."""

import csv
import math
import pathlib

import pytest

vsltk = pytest.importorskip("vsltk")


def test_speed_grid():
    assert vsltk.SPEED_GRID == [30, 40, 50, 60, 70]


def test_guard_functions():
    assert vsltk.invalid_action_set(50) == [70]
    assert vsltk.invalid_action_set(70) == []
    assert vsltk.round_up_to_ten(43) == 50
    assert vsltk.round_up_to_ten(50) == 60
    assert vsltk.speed_match(30, 50, 43.0, 0.0) == 50
    assert vsltk.speed_match(70, 70, 38.0, 0.25) == 40
    assert vsltk.max_speed_clip(70, 55) == 50
    assert vsltk.debounce([50, 60, 30]) == [50, 30, 30]
    assert vsltk.debounce([40, 50, 60, 30]) == [40, 50, 60, 30]


def test_observation_normalization():
    obs = vsltk.build_observation(50, 40.0, 0.2, 60.0, 0.1)
    assert obs == pytest.approx([50 / 70, 0.5, 0.2, 0.75, 0.1])
    assert all(0.0 <= x <= 1.0 for x in obs)


def test_wasserstein():
    a = [[0.0], [0.0]]
    b = [[1.0], [1.0]]
    assert vsltk.wasserstein_distance(a, b) == pytest.approx(1.0)
    assert vsltk.wasserstein_distance(a, a) == pytest.approx(0.0)
    mat = vsltk.mismatch_matrix([a, b, a])
    assert mat[0][1] == pytest.approx(1.0)
    assert mat[0][2] == pytest.approx(0.0)
    assert mat[1][0] == pytest.approx(mat[0][1])


def test_simulate_and_replay(tmp_path: pathlib.Path):
    out = tmp_path / "sim"
    summary = vsltk.simulate(builtin="training", out_dir=str(out), seed=3, horizon_s=600.0)
    assert summary["ticks"] == 10
    assert summary["vehicle_miles"] > 0.0

    csv_path = out / "measurements.csv"
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10 * 8  # ticks x sensors
    assert {r["sensor_id"] for r in rows} == {f"s0{i}" for i in range(1, 9)}

    stats = vsltk.replay(
        str(csv_path), builtin="training", seed=3, tick_seconds=60.0,
        log_dir=str(tmp_path / "log"),
    )
    assert stats["ticks"] == 10
    assert stats["records"] == 10 * 8


def test_train_zero_iterations(tmp_path: pathlib.Path):
    curve = vsltk.train(out_dir=str(tmp_path), seed=9, iterations=0)
    assert curve == []
    assert (tmp_path / "checkpoint.json").exists()


def test_attribution_from_replay(tmp_path: pathlib.Path):
    out = tmp_path / "sim"
    vsltk.simulate(builtin="training", out_dir=str(out), seed=5, horizon_s=600.0)
    vsltk.replay(
        str(out / "measurements.csv"), builtin="training", seed=5, tick_seconds=60.0,
        log_dir=str(tmp_path / "log"),
    )
    summary = vsltk.attribution_summary([str(tmp_path / "log")])
    total = sum(summary[s]["mean_pct"] for s in ("Policy", "SM", "MSLC", "DB"))
    assert math.isclose(total, 100.0, abs_tol=0.1)
    assert summary["total_decisions"] == 10 * 8
