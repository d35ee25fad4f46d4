"""Test history tables and result files."""
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest
import yaml

from asteroid_gnc.const import FUSED_FILE, METRICS_FILE, SCENARIO_COPY_FILE
from asteroid_gnc.constellation import FusedRecord
from asteroid_gnc.exceptions import OutputError
from asteroid_gnc.metrics import compute_metrics, metrics_from_frames
from asteroid_gnc.outputs import (
    emit_outputs,
    fused_frame,
    gravity_columns,
    history_columns,
    history_frames,
    read_outputs,
)
from asteroid_gnc.scenario import load_scenario


def test_history_columns_are_unique():
    """Test the column layout has no duplicates and ends with the gravity block."""
    columns = history_columns(2)
    assert len(columns) == len(set(columns))
    assert columns[0] == "t_s"
    assert columns[-10:] == gravity_columns(2)
    assert gravity_columns(2)[:2] == ["C20_est", "C20_std"]


def test_fused_frame():
    """Test one row per fused record with interleaved mean and spread."""
    records = [FusedRecord(0.0, np.arange(5.0), np.ones(5)), FusedRecord(36.0, -np.arange(5.0), np.full(5, 0.5))]
    frame = fused_frame(records, 2)
    assert list(frame.columns[:3]) == ["t_s", "C20_mean", "C20_std"]
    np.testing.assert_array_equal(frame["t_s"], [0.0, 36.0])
    np.testing.assert_array_equal(frame["S22_mean"], [4.0, -4.0])
    np.testing.assert_array_equal(frame["S22_std"], [1.0, 0.5])


def test_output_directory_failure(tmp_path):
    """Test an unusable output directory raises an output error."""
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(OutputError, match="cannot create output directory"):
        emit_outputs(None, None, None, blocker / "out")


def test_read_missing_outputs(make_scenario, tmp_path):
    """Test reading from an empty directory raises an output error."""
    with pytest.raises(OutputError, match="cannot read table"):
        read_outputs(tmp_path, make_scenario())


@pytest.mark.slow
@pytest.mark.integration
def test_history_frames(small_run):
    """Test the history table of a short run."""
    scenario, result = small_run
    frame = history_frames(result, scenario)["polar"]
    assert list(frame.columns) == history_columns(result.degree)
    np.testing.assert_array_equal(frame["t_s"], [0.0, 36.0, 72.0])
    np.testing.assert_allclose(frame["delta_r_m"], np.abs(frame["spherical_r_m"] - 34e3))
    assert frame["landmarks"].between(0, 3).all()
    assert frame.notna().all().all()


@pytest.mark.slow
@pytest.mark.integration
def test_emit_and_read_back(small_run, tmp_path):
    """Test written files reproduce the tables and the metrics."""
    scenario, result = small_run
    report = compute_metrics(result, scenario)
    written = emit_outputs(result, report, scenario, tmp_path / "out")
    assert sorted(path.name for path in written) == sorted(
        ["history_polar.csv", FUSED_FILE, METRICS_FILE, SCENARIO_COPY_FILE]
    )

    frames, fused = read_outputs(tmp_path / "out", scenario)
    expected = history_frames(result, scenario)["polar"]
    pd.testing.assert_frame_equal(frames["polar"], expected, check_exact=True, check_dtype=False)
    pd.testing.assert_frame_equal(fused, fused_frame(result.fused, result.degree), check_exact=True, check_dtype=False)

    summary = yaml.safe_load((tmp_path / "out" / METRICS_FILE).read_text(encoding="utf-8"))
    assert summary["satellites"]["polar"]["fuel_kg"] == report.satellite("polar").fuel_kg

    reloaded = load_scenario(tmp_path / "out" / SCENARIO_COPY_FILE)
    recomputed = metrics_from_frames(frames, fused, reloaded)
    assert recomputed.as_dict() == report.as_dict()


@pytest.mark.slow
@pytest.mark.integration
def test_emit_is_deterministic(small_run, tmp_path):
    """Test emitting the same run twice writes identical files."""
    scenario, result = small_run
    report = compute_metrics(result, scenario)
    first = emit_outputs(result, report, scenario, tmp_path / "a")
    second = emit_outputs(result, report, scenario, tmp_path / "b")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


@pytest.mark.slow
@pytest.mark.integration
def test_write_failure(small_run, tmp_path):
    """Test a failing write is reported with its path."""
    scenario, result = small_run
    report = compute_metrics(result, scenario)
    with patch("pandas.DataFrame.to_csv", side_effect=OSError("disk full")):
        with pytest.raises(OutputError, match="disk full") as err:
            emit_outputs(result, report, scenario, tmp_path)
    assert err.value.path.name == "history_polar.csv"
