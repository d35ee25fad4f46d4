"""History tables and result files for completed runs."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
import yaml

from .const import FUSED_FILE, HISTORY_FILE, METRICS_FILE, SCENARIO_COPY_FILE
from .constellation import ConstellationResult, EpochSnapshot, FusedRecord
from .elements import euler_angles_from_mrp, mee_to_spherical
from .exceptions import OutputError
from .gravity import AsteroidModel, coefficient_labels

if TYPE_CHECKING:
    from .metrics import MetricsReport
    from .scenario import Scenario

_LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MEE_COMPONENTS = ("p", "f", "g", "h", "k", "L")
AXES = ("1", "2", "3")
ORBIT_AXES = ("r", "t", "n")
BODY_AXES = ("x", "y", "z")
EULER_COMPONENTS = ("pitch", "roll", "yaw")


@dataclass(frozen=True)
class HistoryContext:
    """Per-satellite values the column functions need besides the snapshot."""

    asteroid: AsteroidModel
    a_target: float
    euler_target: np.ndarray


def _euler_deg(sigma_bo: np.ndarray) -> np.ndarray:
    return np.rad2deg(np.array(euler_angles_from_mrp(sigma_bo)))


def _euler_error_deg(snap: EpochSnapshot, ctx: HistoryContext) -> np.ndarray:
    diff = _euler_deg(snap.sigma_bo_true) - ctx.euler_target
    return (diff + 180.0) % 360.0 - 180.0


def _spherical(snap: EpochSnapshot, ctx: HistoryContext) -> np.ndarray:
    coords = mee_to_spherical(snap.x_true, ctx.asteroid.rotation_angle(snap.t))
    return np.array([coords.r, coords.lon, coords.lat], dtype=float)


@dataclass(frozen=True, kw_only=True)
class HistoryColumnDescription:
    """Describes one scalar or vector group of history columns."""

    key: str
    components: tuple[str, ...] = ()
    value_fn: Callable[[EpochSnapshot, HistoryContext], Any]

    @property
    def columns(self) -> list[str]:
        if not self.components:
            return [self.key]
        return [f"{self.key}_{component}" for component in self.components]


HISTORY_COLUMNS: tuple[HistoryColumnDescription, ...] = (
    HistoryColumnDescription(key="t_s", value_fn=lambda snap, ctx: snap.t),
    HistoryColumnDescription(key="x_true", components=MEE_COMPONENTS, value_fn=lambda snap, ctx: snap.x_true),
    HistoryColumnDescription(key="x_est", components=MEE_COMPONENTS, value_fn=lambda snap, ctx: snap.x_est),
    HistoryColumnDescription(key="spherical", components=("r_m", "lon_rad", "lat_rad"), value_fn=_spherical),
    HistoryColumnDescription(
        key="delta_r_m",
        value_fn=lambda snap, ctx: abs(float(_spherical(snap, ctx)[0]) - ctx.a_target),
    ),
    HistoryColumnDescription(key="sigma_bi_true", components=AXES, value_fn=lambda snap, ctx: snap.sigma_bi_true),
    HistoryColumnDescription(key="sigma_bi_est", components=AXES, value_fn=lambda snap, ctx: snap.sigma_bi_est),
    HistoryColumnDescription(key="sigma_bo_true", components=AXES, value_fn=lambda snap, ctx: snap.sigma_bo_true),
    HistoryColumnDescription(key="sigma_bo_est", components=AXES, value_fn=lambda snap, ctx: snap.sigma_bo_est),
    HistoryColumnDescription(
        key="euler_deg", components=EULER_COMPONENTS, value_fn=lambda snap, ctx: _euler_deg(snap.sigma_bo_true)
    ),
    HistoryColumnDescription(key="euler_error_deg", components=EULER_COMPONENTS, value_fn=_euler_error_deg),
    HistoryColumnDescription(key="omega_true", components=BODY_AXES, value_fn=lambda snap, ctx: snap.omega_true),
    HistoryColumnDescription(key="omega_est", components=BODY_AXES, value_fn=lambda snap, ctx: snap.omega_est),
    HistoryColumnDescription(key="gyro_bias_est", components=BODY_AXES, value_fn=lambda snap, ctx: snap.gyro_bias_est),
    HistoryColumnDescription(key="accel_cmd", components=ORBIT_AXES, value_fn=lambda snap, ctx: snap.accel_cmd),
    HistoryColumnDescription(key="accel_applied", components=ORBIT_AXES, value_fn=lambda snap, ctx: snap.accel_applied),
    HistoryColumnDescription(key="torque_cmd", components=BODY_AXES, value_fn=lambda snap, ctx: snap.torque_cmd),
    HistoryColumnDescription(key="torque_applied", components=BODY_AXES, value_fn=lambda snap, ctx: snap.torque_applied),
    HistoryColumnDescription(key="landmarks", value_fn=lambda snap, ctx: snap.landmarks),
)


def gravity_columns(degree: int, suffixes: tuple[str, str] = ("est", "std")) -> list[str]:
    """Estimate and 1σ column names, one pair per packed coefficient."""
    return [f"{label}_{suffix}" for label in coefficient_labels(degree) for suffix in suffixes]


def history_columns(degree: int) -> list[str]:
    """Column order of a satellite history table."""
    names = [name for description in HISTORY_COLUMNS for name in description.columns]
    return names + gravity_columns(degree)


def _history_row(snap: EpochSnapshot, ctx: HistoryContext) -> list[float]:
    row: list[float] = []
    for description in HISTORY_COLUMNS:
        value = description.value_fn(snap, ctx)
        if description.components:
            row.extend(float(v) for v in np.asarray(value, dtype=float).ravel())
        else:
            row.append(float(value))
    for mean, std in zip(snap.gravity_est, snap.gravity_std):
        row.extend((float(mean), float(std)))
    return row


def history_frame(snapshots: list[EpochSnapshot], ctx: HistoryContext, degree: int) -> pd.DataFrame:
    """One row per recorded epoch in the fixed column order."""
    return pd.DataFrame([_history_row(snap, ctx) for snap in snapshots], columns=history_columns(degree))


def history_frames(result: ConstellationResult, scenario: Scenario) -> dict[str, pd.DataFrame]:
    """History tables of every satellite, keyed by satellite id in scenario order."""
    frames: dict[str, pd.DataFrame] = {}
    for setup in scenario.satellites:
        ctx = HistoryContext(
            asteroid=scenario.mission.asteroid,
            a_target=setup.a_target,
            euler_target=_euler_deg(setup.sigma_target),
        )
        frames[setup.sat_id] = history_frame(result.histories[setup.sat_id], ctx, result.degree)
    return frames


def fused_frame(records: list[FusedRecord], degree: int) -> pd.DataFrame:
    """Fused gravity estimate and 1σ per epoch."""
    rows = [[record.t, *np.ravel(np.column_stack([record.mean, record.std]))] for record in records]
    return pd.DataFrame(rows, columns=["t_s", *gravity_columns(degree, ("mean", "std"))])


def _write(path: Path, writer: Callable[[Path], None]) -> Path:
    try:
        writer(path)
    except OSError as err:
        _LOGGER.error("Cannot write %s: %s", path, err)
        raise OutputError(path, f"cannot write file: {err}") from err
    return path


def _write_yaml(document: dict[str, Any]) -> Callable[[Path], None]:
    def writer(path: Path) -> None:
        path.write_text(yaml.safe_dump(document, sort_keys=False), encoding="utf-8")

    return writer


def emit_outputs(
    result: ConstellationResult, report: MetricsReport, scenario: Scenario, out_dir: str | Path
) -> list[Path]:
    """Write history tables, fused gravity, metrics summary and the scenario used."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OutputError(out_dir, f"cannot create output directory: {err}") from err

    written = []
    for sat_id, frame in history_frames(result, scenario).items():
        path = out_dir / HISTORY_FILE.format(sat_id=sat_id)
        written.append(_write(path, lambda p, f=frame: f.to_csv(p, index=False, float_format=FLOAT_FORMAT)))
    fused = fused_frame(result.fused, result.degree)
    written.append(
        _write(out_dir / FUSED_FILE, lambda p: fused.to_csv(p, index=False, float_format=FLOAT_FORMAT))
    )
    written.append(_write(out_dir / METRICS_FILE, _write_yaml(report.as_dict())))
    written.append(_write(out_dir / SCENARIO_COPY_FILE, _write_yaml(scenario.as_document())))
    _LOGGER.info("Wrote %d files to %s", len(written), out_dir)
    return written


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise OutputError(path, f"cannot read table: {err}") from err


def read_outputs(out_dir: str | Path, scenario: Scenario) -> tuple[dict[str, pd.DataFrame], pd.DataFrame]:
    """Load the history and fused tables written by emit_outputs."""
    out_dir = Path(out_dir)
    frames = {
        setup.sat_id: _read_csv(out_dir / HISTORY_FILE.format(sat_id=setup.sat_id))
        for setup in scenario.satellites
    }
    return frames, _read_csv(out_dir / FUSED_FILE)
