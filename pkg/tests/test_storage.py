import json

import numpy as np
import pytest

from storage import ResultStorage, read_locations, read_summary, read_weights, summary_value
from utils import ConfigError


def test_locations_are_read_back_sorted(tmp_path):
    storage = ResultStorage(str(tmp_path))
    path = storage.write_locations([7, 2], [3.5, 0.25], [0.4, 1.0])
    indices, positions = read_locations(path)
    assert indices.tolist() == [2, 7]
    assert positions.tolist() == [0.25, 3.5]
    assert storage.files_created == [path]


def test_csv_uses_lf_and_full_precision(tmp_path):
    path = ResultStorage(str(tmp_path)).write_locations([0], [1.0 / 3.0], [0.1])
    raw = open(path, "rb").read()
    assert b"\r\n" not in raw
    assert raw.decode("utf-8").splitlines()[0] == "index,position_lambda,group_norm"
    assert float(raw.decode("utf-8").splitlines()[1].split(",")[1]) == 1.0 / 3.0


def test_weights_layout_and_reader(tmp_path):
    storage = ResultStorage(str(tmp_path))
    groups = np.array([[0.5, -0.25, 0.0], [1.0, 2.0, 3.0]])
    path = storage.write_weights([4, 9], groups)
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "sensor,tap,value"
    assert lines[4] == "9,0,1"
    np.testing.assert_array_equal(read_weights(path, [9, 4], 3), groups[::-1])
    with pytest.raises(ConfigError):
        read_weights(path, [4, 9], 4)
    with pytest.raises(ConfigError):
        read_weights(path, [4], 3)


def test_empty_weights_file(tmp_path):
    path = ResultStorage(str(tmp_path)).write_weights([], np.zeros((0, 3)))
    assert open(path, encoding="utf-8").read().splitlines() == ["sensor,tap,value"]


def test_fitness_history(tmp_path):
    path = ResultStorage(str(tmp_path)).write_fitness_history([0.0, 4.0, 5.0])
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "generation,best_fitness,best_jcls"
    assert lines[2] == "1,4,0.25"
    assert len(lines) == 4


def test_iterations(tmp_path):
    path = ResultStorage(str(tmp_path)).write_iterations([10.0, 8.5], [30, 12])
    assert open(path, encoding="utf-8").read().splitlines() == [
        "iteration,objective,active_count", "1,10,30", "2,8.5,12"]


def test_summary_json(tmp_path):
    storage = ResultStorage(str(tmp_path / "nested"))
    path = storage.write_summary({"a": np.float64(1.5), "b": np.int64(3), "c": float("inf"),
                                  "d": np.array([1, 2]), "e": np.bool_(True)})
    data = read_summary(path)
    assert data == {"a": 1.5, "b": 3, "c": None, "d": [1, 2], "e": True}


def test_summary_value_lookup():
    summary = {"j_cls": 0.04, "active_count": None, "metrics": {"active_count": 11, "mean_spacing": 0.62},
               "success": True}
    assert summary_value(summary, "j_cls") == 0.04
    assert summary_value(summary, "active_count") == 11.0
    assert summary_value(summary, "mean_spacing") == 0.62
    assert summary_value(summary, "success") is None
    assert summary_value(summary, "wall_time_s") is None


def test_reader_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_locations(str(tmp_path / "missing.csv"))
    bad = tmp_path / "bad.csv"
    bad.write_text("index,where\n0,1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_locations(str(bad))
    junk = tmp_path / "summary.json"
    junk.write_text(json.dumps([1, 2]), encoding="utf-8")
    with pytest.raises(ConfigError):
        read_summary(str(junk))
