import json
import logging

import numpy as np
import pandas as pd
import pytest

from errors import ConfigValidationError
from logger import get_logger, log_diagnostic, log_error
from utils import (
    ResourceTracker,
    config_hash,
    load_array,
    make_serializable,
    read_csv_with_footer,
    read_json_as_dict,
    run_in_parallel,
    save_array,
    save_dataframe_as_csv,
    save_json,
    set_seeds,
)


def test_set_seeds_rejects_negative_seed():
    with pytest.raises(ValueError):
        set_seeds(-1)


def test_set_seeds_makes_numpy_reproducible():
    set_seeds(42)
    first = np.random.rand(3)
    set_seeds(42)
    assert np.array_equal(first, np.random.rand(3))


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1.0, 2.0]}) == config_hash({"b": [1.0, 2.0], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_make_serializable_handles_numpy_and_complex():
    payload = {"i": np.int64(3), "f": np.float32(0.5), "z": 1 + 2j, "a": np.arange(2), "b": np.bool_(True)}
    decoded = json.loads(json.dumps(payload, default=make_serializable))
    assert decoded == {"i": 3, "f": 0.5, "z": [1.0, 2.0], "a": [0, 1], "b": True}


def test_csv_footer_is_skipped_on_read(tmp_path):
    path = tmp_path / "table.csv"
    save_dataframe_as_csv(pd.DataFrame({"N": [1.0, 2.0]}), str(path), footer="config_hash=abc")
    assert path.read_text(encoding="utf-8").splitlines()[-1] == "# config_hash=abc"
    assert read_csv_with_footer(str(path))["N"].tolist() == [1.0, 2.0]


def test_arrays_are_stored_with_sidecar(tmp_path):
    values = np.arange(6, dtype=complex).reshape(2, 3) * (1 - 1j)
    save_array(str(tmp_path / "v.bin"), values, {"kind": "test"})
    loaded, sidecar = load_array(str(tmp_path / "v.bin"))
    assert np.array_equal(loaded, values)
    assert sidecar["dtype"] == "<c16"
    assert sidecar["kind"] == "test"


def test_save_json_creates_parent_directories(tmp_path):
    save_json(str(tmp_path / "nested" / "d.json"), {"x": np.float64(1.5)})
    assert read_json_as_dict(str(tmp_path / "nested" / "d.json")) == {"x": 1.5}


def test_read_json_refuses_directories_and_non_objects(tmp_path):
    with pytest.raises(ValueError):
        read_json_as_dict(str(tmp_path))
    (tmp_path / "list.json").write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError):
        read_json_as_dict(str(tmp_path / "list.json"))


@pytest.mark.parametrize("n_jobs", [1, 3])
def test_parallel_map_keeps_input_order(n_jobs):
    assert run_in_parallel(lambda x: x * x, range(10), n_jobs=n_jobs) == [x * x for x in range(10)]


def test_resource_tracker_records_time_and_memory():
    with ResourceTracker(logger=get_logger("test_utils"), monitoring_interval=1) as tracker:
        pass
    assert tracker.elapsed_time >= 0.0
    assert tracker.peak_memory > 0


def test_get_logger_adds_one_handler():
    first = get_logger("test_utils_handlers")
    second = get_logger("test_utils_handlers")
    assert first is second
    assert len(first.handlers) == 1


def test_log_diagnostic_warns_above_limit(caplog):
    logger = get_logger("test_utils_diagnostic")
    with caplog.at_level(logging.INFO, logger="test_utils_diagnostic"):
        assert log_diagnostic(logger, "ratio", 0.5, 1.0)
        assert not log_diagnostic(logger, "ratio", 2.0, 1.0)
    assert [record.levelno for record in caplog.records] == [logging.INFO, logging.WARNING]


def test_log_error_writes_traceback(tmp_path):
    path = tmp_path / "errors" / "error.txt"
    try:
        raise ValueError("bad input")
    except ValueError as exc:
        log_error("Run failed.", exc, str(path))
    text = path.read_text(encoding="utf-8")
    assert text.startswith("Run failed. Error: bad input\nType: ValueError\n")
    assert "Traceback" in text


def test_log_error_lists_field_errors(tmp_path):
    path = tmp_path / "error.txt"
    error = ConfigValidationError("Invalid configuration.", [("sweep.beta", "must lie in (0, 1)")])
    log_error("Run failed.", error, str(path))
    assert "  sweep.beta: must lie in (0, 1)" in path.read_text(encoding="utf-8").splitlines()
