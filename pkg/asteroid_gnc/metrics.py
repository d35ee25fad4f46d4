"""Performance metrics computed from history tables."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from .const import (
    CONVERGENCE_THRESHOLD_PCT,
    DEG_PER_HOUR,
    G0,
    RELEVANCE_THRESHOLD,
    SECONDS_PER_DAY,
    SECONDS_PER_HOUR,
)
from .elements import mee_position, mrp_to_rotation
from .gravity import coefficient_labels
from .outputs import BODY_AXES, EULER_COMPONENTS, MEE_COMPONENTS, ORBIT_AXES, fused_frame, history_frames

if TYPE_CHECKING:
    from .constellation import ConstellationResult
    from .scenario import Scenario

_LOGGER = logging.getLogger(__name__)


def time_average(t: np.ndarray, values: np.ndarray) -> float:
    """Trapezoidal mean of a sampled series over its time span."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.size == 0:
        raise ValueError("Cannot average an empty series")
    if t.size < 2 or t[-1] <= t[0]:
        return float(values[0])
    return float(trapezoid(values, t) / (t[-1] - t[0]))


def fuel_consumption(t: np.ndarray, accel_norm: np.ndarray, mass: float, isp: float) -> float:
    """Propellant mass m₀·∫‖a‖dt / (g₀·Isp)."""
    if np.size(t) < 2:
        return 0.0
    return float(mass * trapezoid(accel_norm, t) / (G0 * isp))


def convergence_time(t: np.ndarray, error_pct: np.ndarray, threshold: float = CONVERGENCE_THRESHOLD_PCT) -> float | None:
    """First instant after which the error stays below the threshold; None if it never settles."""
    below = np.asarray(error_pct) < threshold
    if below.size == 0 or not below[-1]:
        return None
    above = np.flatnonzero(~below)
    return float(t[0] if above.size == 0 else t[above[-1] + 1])


def _day_masks(t: np.ndarray) -> list[np.ndarray]:
    days = max(1, int(np.ceil((t[-1] - t[0]) / SECONDS_PER_DAY - 1e-9)))
    eps = 1e-9 * SECONDS_PER_DAY
    return [
        (t >= t[0] + d * SECONDS_PER_DAY - eps) & (t <= t[0] + (d + 1) * SECONDS_PER_DAY + eps)
        for d in range(days)
    ]


@dataclass(frozen=True)
class CoefficientMetrics:
    """Final error and convergence time of one relevant coefficient."""

    label: str
    truth: float
    estimate: float
    error_pct: float
    convergence_h: float | None

    def as_dict(self) -> dict[str, Any]:
        data = {
            "truth": self.truth,
            "estimate": self.estimate,
            "error_pct": self.error_pct,
        }
        if self.convergence_h is not None:
            data["convergence_h"] = self.convergence_h
        return data


@dataclass(frozen=True)
class SatelliteMetrics:
    """Fuel, tracking, torque and navigation figures of one satellite."""

    sat_id: str
    fuel_kg: float
    delta_r_mean_m: float
    delta_r_max_m: float
    delta_r_max_time_h: float
    torque_mean_n_m: float
    euler_error_mean_deg: tuple[float, float, float]
    euler_error_max_deg: tuple[float, float, float]
    daily_delta_r_m: tuple[float, ...]
    daily_fuel_kg: tuple[float, ...]
    position_error_m: float
    attitude_error_deg: float
    gyro_bias_error_deg_h: float
    coefficients: tuple[CoefficientMetrics, ...]

    def __post_init__(self) -> None:
        if self.delta_r_max_m < self.delta_r_mean_m - 1e-9 * max(1.0, self.delta_r_max_m):
            raise ValueError("Maximum tracking error below its mean")

    def as_dict(self) -> dict[str, Any]:
        return {
            "fuel_kg": self.fuel_kg,
            "delta_r_mean_m": self.delta_r_mean_m,
            "delta_r_max_m": self.delta_r_max_m,
            "delta_r_max_time_h": self.delta_r_max_time_h,
            "torque_mean_n_m": self.torque_mean_n_m,
            "euler_error_mean_deg": dict(zip(EULER_COMPONENTS, self.euler_error_mean_deg)),
            "euler_error_max_deg": dict(zip(EULER_COMPONENTS, self.euler_error_max_deg)),
            "daily_delta_r_m": list(self.daily_delta_r_m),
            "daily_fuel_kg": list(self.daily_fuel_kg),
            "navigation": {
                "position_error_m": self.position_error_m,
                "attitude_error_deg": self.attitude_error_deg,
                "gyro_bias_error_deg_h": self.gyro_bias_error_deg_h,
            },
            "coefficients": {c.label: c.as_dict() for c in self.coefficients},
        }


@dataclass(frozen=True)
class MetricsReport:
    """Metrics of one run: per satellite plus the fused gravity estimate."""

    scenario: str
    mode: str
    duration_h: float
    satellites: tuple[SatelliteMetrics, ...]
    fused: tuple[CoefficientMetrics, ...]

    def satellite(self, sat_id: str) -> SatelliteMetrics:
        for metrics in self.satellites:
            if metrics.sat_id == sat_id:
                return metrics
        raise KeyError(sat_id)

    @property
    def delta_r_mean_m(self) -> float:
        """Constellation average of the mean radial tracking error."""
        return float(np.mean([s.delta_r_mean_m for s in self.satellites]))

    def as_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "duration_h": self.duration_h,
            "satellites": {s.sat_id: s.as_dict() for s in self.satellites},
            "fused": {c.label: c.as_dict() for c in self.fused},
        }


def coefficient_metrics(
    t: np.ndarray, estimates: pd.DataFrame, truth: np.ndarray, labels: list[str]
) -> tuple[CoefficientMetrics, ...]:
    """Error and convergence of the coefficients whose true magnitude is relevant."""
    metrics = []
    for label, true_value in zip(labels, truth):
        if abs(true_value) <= RELEVANCE_THRESHOLD:
            continue
        series = estimates[label].to_numpy(dtype=float)
        error = 100.0 * np.abs(series - true_value) / abs(true_value)
        settled = convergence_time(t, error)
        metrics.append(
            CoefficientMetrics(
                label=label,
                truth=float(true_value),
                estimate=float(series[-1]),
                error_pct=float(error[-1]),
                convergence_h=None if settled is None else settled / SECONDS_PER_HOUR,
            )
        )
    return tuple(metrics)


def _columns(frame: pd.DataFrame, key: str, components: tuple[str, ...]) -> np.ndarray:
    return frame[[f"{key}_{c}" for c in components]].to_numpy(dtype=float)


def satellite_metrics(sat_id: str, frame: pd.DataFrame, scenario: Scenario, degree: int) -> SatelliteMetrics:
    """Metrics of one satellite from its history table."""
    if frame.empty:
        raise ValueError(f"Empty history for satellite {sat_id}")
    setup = next(s for s in scenario.satellites if s.sat_id == sat_id)
    spacecraft = setup.spacecraft
    t = frame["t_s"].to_numpy(dtype=float)

    accel_norm = np.linalg.norm(_columns(frame, "accel_applied", ORBIT_AXES), axis=1)
    torque_norm = np.linalg.norm(_columns(frame, "torque_applied", BODY_AXES), axis=1)
    delta_r = frame["delta_r_m"].to_numpy(dtype=float)
    euler_error = np.abs(_columns(frame, "euler_error_deg", EULER_COMPONENTS))

    masks = _day_masks(t)
    daily_delta_r = tuple(time_average(t[m], delta_r[m]) for m in masks if m.sum() >= 1)
    daily_fuel = tuple(
        fuel_consumption(t[m], accel_norm[m], spacecraft.mass, spacecraft.isp) for m in masks if m.sum() >= 1
    )

    last = frame.iloc[-1:]
    pos_true = mee_position(_columns(last, "x_true", MEE_COMPONENTS)[0])
    pos_est = mee_position(_columns(last, "x_est", MEE_COMPONENTS)[0])
    rot_err = mrp_to_rotation(_columns(last, "sigma_bi_true", ("1", "2", "3"))[0]) @ mrp_to_rotation(
        _columns(last, "sigma_bi_est", ("1", "2", "3"))[0]
    ).T
    attitude_error = np.rad2deg(np.arccos(np.clip(0.5 * (np.trace(rot_err) - 1.0), -1.0, 1.0)))
    bias_true = scenario.mission.navigation.suite.gyro_bias
    bias_error = np.linalg.norm(_columns(last, "gyro_bias_est", BODY_AXES)[0] - bias_true) / DEG_PER_HOUR

    labels = coefficient_labels(degree)
    truth = scenario.mission.asteroid.gravity.packed(degree)
    estimates = frame[[f"{label}_est" for label in labels]].set_axis(labels, axis=1)
    return SatelliteMetrics(
        sat_id=sat_id,
        fuel_kg=fuel_consumption(t, accel_norm, spacecraft.mass, spacecraft.isp),
        delta_r_mean_m=time_average(t, delta_r),
        delta_r_max_m=float(delta_r.max()),
        delta_r_max_time_h=float(t[np.argmax(delta_r)] / SECONDS_PER_HOUR),
        torque_mean_n_m=time_average(t, torque_norm),
        euler_error_mean_deg=tuple(time_average(t, euler_error[:, k]) for k in range(3)),
        euler_error_max_deg=tuple(float(v) for v in euler_error.max(axis=0)),
        daily_delta_r_m=daily_delta_r,
        daily_fuel_kg=daily_fuel,
        position_error_m=float(np.linalg.norm(pos_true - pos_est)),
        attitude_error_deg=float(attitude_error),
        gyro_bias_error_deg_h=float(bias_error),
        coefficients=coefficient_metrics(t, estimates, truth, labels),
    )


def metrics_from_frames(
    frames: dict[str, pd.DataFrame], fused: pd.DataFrame, scenario: Scenario
) -> MetricsReport:
    """Metrics recomputed from history tables, in memory or read back from disk."""
    if not frames:
        raise ValueError("No satellite histories")
    labels = [c.removesuffix("_mean") for c in fused.columns if c.endswith("_mean")]
    degree = int(round(np.sqrt(len(labels) + 4))) - 1
    satellites = tuple(satellite_metrics(sat_id, frame, scenario, degree) for sat_id, frame in frames.items())
    t_fused = fused["t_s"].to_numpy(dtype=float)
    fused_estimates = fused[[f"{label}_mean" for label in labels]].set_axis(labels, axis=1)
    truth = scenario.mission.asteroid.gravity.packed(degree)
    report = MetricsReport(
        scenario=scenario.name,
        mode=scenario.mode,
        duration_h=float(t_fused[-1] / SECONDS_PER_HOUR) if t_fused.size else 0.0,
        satellites=satellites,
        fused=coefficient_metrics(t_fused, fused_estimates, truth, labels) if t_fused.size else (),
    )
    for sat in satellites:
        _LOGGER.info(
            "%s: fuel %.4f kg, mean ΔR %.2f m, max ΔR %.2f m", sat.sat_id, sat.fuel_kg, sat.delta_r_mean_m, sat.delta_r_max_m
        )
    return report


def compute_metrics(result: ConstellationResult, scenario: Scenario) -> MetricsReport:
    """Metrics of a completed run."""
    if not result.histories or not any(result.histories.values()):
        raise ValueError("Empty history")
    return metrics_from_frames(history_frames(result, scenario), fused_frame(result.fused, result.degree), scenario)
