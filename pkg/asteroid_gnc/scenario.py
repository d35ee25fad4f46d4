"""Scenario files: YAML loading, schema validation and runtime object assembly."""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol
import yaml

from .const import (
    ARCSEC,
    AU,
    DEFAULT_ACCEL_MAX,
    DEFAULT_ACTUATOR_RATE,
    DEFAULT_ATTITUDE_DEGREE,
    DEFAULT_ATTITUDE_HORIZON_S,
    DEFAULT_ATTITUDE_INTERVAL_S,
    DEFAULT_ATTITUDE_INTERVALS,
    DEFAULT_FOCAL_LENGTH_M,
    DEFAULT_FOV_DEG,
    DEFAULT_GYRO_BIAS_DEG_H,
    DEFAULT_GYRO_SIGMA_DEG_H,
    DEFAULT_ISP_S,
    DEFAULT_LANDMARK_COUNT,
    DEFAULT_LIDAR_SIGMA_M,
    DEFAULT_MASS_KG,
    DEFAULT_MU,
    DEFAULT_ORBIT_DEGREE,
    DEFAULT_ORBIT_HORIZON_S,
    DEFAULT_ORBIT_INTERVAL_S,
    DEFAULT_ORBIT_INTERVALS,
    DEFAULT_PIXEL_SIGMA_PX,
    DEFAULT_POINT_MASSES,
    DEFAULT_REFERENCE_RADIUS_M,
    DEFAULT_REFLECTIVITY,
    DEFAULT_RESOLUTION_PX,
    DEFAULT_SEMI_AXES_M,
    DEFAULT_SPIN_PERIOD_S,
    DEFAULT_SRP_AREA_M2,
    DEFAULT_STAR_TRACKER_SIGMA_ARCSEC,
    DEFAULT_SUN_DISTANCE_AU,
    DEFAULT_TORQUE_MAX,
    DEFAULT_TRACKED_LANDMARKS,
    DEFAULT_TRACKING_WEIGHT,
    DEFAULT_UKF_ALPHA,
    DEFAULT_UKF_BETA,
    DEFAULT_UKF_THETA,
    DEG_PER_HOUR,
    MODE_LEARNING,
    MODES,
)
from .constellation import Mission, SatelliteSetup, ScheduleConfig, aligned_truth
from .datafiles import (
    SYNTHETIC_C20,
    SYNTHETIC_C22,
    SYNTHETIC_HIGH_DEGREE_SIGMA,
    SYNTHETIC_S22,
    load_gravity_coefficients,
    load_landmarks,
    synthetic_gravity_model,
    synthetic_landmarks,
)
from .dynamics import ActuatorProfile, IntegratorSettings, SpacecraftConfig
from .elements import ClassicalElements, classical_to_mee
from .exceptions import DataFileError, GncError, ScenarioError
from .gravity import AsteroidModel, MassDistribution, SolarModel
from .mpc import MpcConfig
from .navfilters import NavigationConfig
from .sensors import CameraModel, LandmarkCatalog, SensorSuite
from .ukf import UkfParams

_LOGGER = logging.getLogger(__name__)

PRESET_PACKAGE = "asteroid_gnc.scenarios"

positive_float = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
non_negative_float = vol.All(vol.Coerce(float), vol.Range(min=0.0))
positive_int = vol.All(vol.Coerce(int), vol.Range(min=1))
vector3 = vol.All([vol.Coerce(float)], vol.Length(min=3, max=3))

SYNTHETIC_SCHEMA = vol.Schema(
    {
        vol.Optional("degree", default=4): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional("c20", default=SYNTHETIC_C20): vol.Coerce(float),
        vol.Optional("c22", default=SYNTHETIC_C22): vol.Coerce(float),
        vol.Optional("s22", default=SYNTHETIC_S22): vol.Coerce(float),
        vol.Optional("high_degree_sigma", default=SYNTHETIC_HIGH_DEGREE_SIGMA): non_negative_float,
    }
)

ASTEROID_SCHEMA = vol.Schema(
    {
        vol.Optional("mu_m3s2", default=DEFAULT_MU): positive_float,
        vol.Optional("spin_period_s", default=DEFAULT_SPIN_PERIOD_S): positive_float,
        vol.Optional("reference_radius_m", default=DEFAULT_REFERENCE_RADIUS_M): positive_float,
        vol.Optional("gravity_file", default=None): vol.Any(None, str),
        vol.Optional("synthetic", default={}): SYNTHETIC_SCHEMA,
        vol.Optional("landmarks_file", default=None): vol.Any(None, str),
        vol.Optional("landmark_count", default=DEFAULT_LANDMARK_COUNT): positive_int,
        vol.Optional("semi_axes_m", default=list(DEFAULT_SEMI_AXES_M)): vol.All(vector3, [positive_float]),
    }
)

SUN_SCHEMA = vol.Schema(
    {
        vol.Optional("enabled", default=True): bool,
        vol.Optional("distance_au", default=DEFAULT_SUN_DISTANCE_AU): positive_float,
    }
)

POINT_MASS_SCHEMA = vol.Schema({vol.Required("offset_m"): vector3, vol.Required("mass_kg"): positive_float})

SPACECRAFT_SCHEMA = vol.Schema(
    {
        vol.Optional("mass_kg", default=DEFAULT_MASS_KG): positive_float,
        vol.Optional("reflectivity", default=DEFAULT_REFLECTIVITY): non_negative_float,
        vol.Optional("srp_area_m2", default=DEFAULT_SRP_AREA_M2): non_negative_float,
        vol.Optional("isp_s", default=DEFAULT_ISP_S): positive_float,
        vol.Optional("accel_max_m_s2", default=DEFAULT_ACCEL_MAX): positive_float,
        vol.Optional("torque_max_n_m", default=DEFAULT_TORQUE_MAX): positive_float,
        vol.Optional("actuator_rate_1_s", default=DEFAULT_ACTUATOR_RATE): positive_float,
        vol.Optional(
            "point_masses",
            default=[{"offset_m": list(offset), "mass_kg": mass} for offset, mass in DEFAULT_POINT_MASSES],
        ): vol.All([POINT_MASS_SCHEMA], vol.Length(min=1)),
    }
)

SENSORS_SCHEMA = vol.Schema(
    {
        vol.Optional("pixel_sigma_px", default=DEFAULT_PIXEL_SIGMA_PX): non_negative_float,
        vol.Optional("lidar_sigma_m", default=DEFAULT_LIDAR_SIGMA_M): non_negative_float,
        vol.Optional("star_tracker_sigma_arcsec", default=DEFAULT_STAR_TRACKER_SIGMA_ARCSEC): non_negative_float,
        vol.Optional("gyro_sigma_deg_h", default=DEFAULT_GYRO_SIGMA_DEG_H): non_negative_float,
        vol.Optional("gyro_bias_deg_h", default=list(DEFAULT_GYRO_BIAS_DEG_H)): vector3,
        vol.Optional("tracked_landmarks", default=DEFAULT_TRACKED_LANDMARKS): positive_int,
        vol.Optional("quantization_variance", default=True): bool,
        vol.Optional("focal_length_m", default=DEFAULT_FOCAL_LENGTH_M): positive_float,
        vol.Optional("fov_deg", default=DEFAULT_FOV_DEG): vol.All(vol.Coerce(float), vol.Range(min=0.0, max=180.0, min_included=False, max_included=False)),
        vol.Optional("resolution_px", default=DEFAULT_RESOLUTION_PX): positive_int,
    }
)

NAVIGATION_SCHEMA = vol.Schema(
    {
        vol.Optional("orbit_degree", default=DEFAULT_ORBIT_DEGREE): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional("attitude_degree", default=DEFAULT_ATTITUDE_DEGREE): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional("orbit_interval_s", default=DEFAULT_ORBIT_INTERVAL_S): positive_float,
        vol.Optional("attitude_interval_s", default=DEFAULT_ATTITUDE_INTERVAL_S): positive_float,
        vol.Optional("ukf_alpha", default=DEFAULT_UKF_ALPHA): vol.All(vol.Coerce(float), vol.Range(min=0.0, max=1.0)),
        vol.Optional("ukf_theta", default=DEFAULT_UKF_THETA): positive_float,
        vol.Optional("ukf_beta", default=DEFAULT_UKF_BETA): vol.Coerce(float),
        vol.Optional("perturb_initial", default=False): bool,
    }
)

CONTROL_SCHEMA = vol.Schema(
    {
        vol.Optional("orbit_horizon_s", default=DEFAULT_ORBIT_HORIZON_S): positive_float,
        vol.Optional("orbit_intervals", default=DEFAULT_ORBIT_INTERVALS): positive_int,
        vol.Optional("attitude_horizon_s", default=DEFAULT_ATTITUDE_HORIZON_S): positive_float,
        vol.Optional("attitude_intervals", default=DEFAULT_ATTITUDE_INTERVALS): positive_int,
        vol.Optional("orbit_gamma", default=DEFAULT_TRACKING_WEIGHT): positive_float,
        vol.Optional("attitude_gamma", default=DEFAULT_TRACKING_WEIGHT): positive_float,
    }
)

SATELLITE_SCHEMA = vol.Schema(
    {
        vol.Required("id"): vol.All(vol.Coerce(str), vol.Length(min=1)),
        vol.Required("a_target_m"): positive_float,
        vol.Optional("inclination_deg", default=90.0): vol.All(vol.Coerce(float), vol.Range(min=0.0, max=180.0, max_included=False)),
        vol.Optional("raan_deg", default=0.0): vol.Coerce(float),
        vol.Optional("arg_latitude_deg", default=0.0): vol.Coerce(float),
        vol.Optional("sigma_bo_target", default=[0.0, 0.0, 0.0]): vector3,
    }
)

SCENARIO_SCHEMA = vol.Schema(
    {
        vol.Optional("name", default="scenario"): str,
        vol.Optional("seed", default=0): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Required("duration_s"): positive_float,
        vol.Optional("mode", default=MODE_LEARNING): vol.In(MODES),
        vol.Optional("nullify_out_of_plane", default=True): bool,
        vol.Optional("attitude_write_back", default=True): bool,
        vol.Optional("asteroid", default={}): ASTEROID_SCHEMA,
        vol.Optional("sun", default={}): SUN_SCHEMA,
        vol.Optional("spacecraft", default={}): SPACECRAFT_SCHEMA,
        vol.Optional("sensors", default={}): SENSORS_SCHEMA,
        vol.Optional("navigation", default={}): NAVIGATION_SCHEMA,
        vol.Optional("control", default={}): CONTROL_SCHEMA,
        vol.Required("satellites"): vol.All([SATELLITE_SCHEMA], vol.Length(min=1)),
    }
)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated configuration and the runtime objects built from it."""

    name: str
    seed: int
    config: dict[str, Any]
    mission: Mission
    satellites: tuple[SatelliteSetup, ...]
    base_dir: Path

    @property
    def mode(self) -> str:
        return self.mission.schedule.mode

    def as_document(self) -> dict[str, Any]:
        """Validated config with data file paths made absolute, ready to dump as YAML."""
        document = copy.deepcopy(self.config)
        for key in ("gravity_file", "landmarks_file"):
            if document["asteroid"][key]:
                document["asteroid"][key] = str((self.base_dir / document["asteroid"][key]).resolve())
        return document

    def with_overrides(self, **overrides: Any) -> Scenario:
        """Rebuild with top-level keys replaced (mode, seed, nullify_out_of_plane, ...)."""
        config = copy.deepcopy(self.config)
        config.update(overrides)
        return build_scenario(config, self.base_dir)


def _is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio) and round(ratio) >= 1


def check_invariants(config: dict[str, Any]) -> None:
    """Cross-field checks the schema cannot express."""
    nav = config["navigation"]
    ctrl = config["control"]
    if nav["attitude_degree"] > nav["orbit_degree"]:
        raise ScenarioError("navigation.attitude_degree must not exceed navigation.orbit_degree")
    if not _is_multiple(nav["orbit_interval_s"], nav["attitude_interval_s"]):
        raise ScenarioError("navigation.orbit_interval_s must be an integer multiple of attitude_interval_s")
    orbit_dt = ctrl["orbit_horizon_s"] / ctrl["orbit_intervals"]
    if not _is_multiple(orbit_dt, nav["orbit_interval_s"]):
        raise ScenarioError("Orbit MPC interval must be an integer multiple of navigation.orbit_interval_s")
    if not _is_multiple(config["duration_s"], nav["orbit_interval_s"]):
        raise ScenarioError("duration_s must be an integer multiple of navigation.orbit_interval_s")
    ids = [sat["id"] for sat in config["satellites"]]
    if len(set(ids)) != len(ids):
        raise ScenarioError("Satellite ids must be unique")
    radius = config["asteroid"]["reference_radius_m"]
    for sat in config["satellites"]:
        if sat["a_target_m"] <= radius:
            raise ScenarioError(f"Satellite {sat['id']}: a_target_m must lie outside the reference radius")
    masses = np.array([pm["mass_kg"] for pm in config["spacecraft"]["point_masses"]])
    offsets = np.array([pm["offset_m"] for pm in config["spacecraft"]["point_masses"]])
    if abs(masses.sum() - config["spacecraft"]["mass_kg"]) > 1e-9 * masses.sum():
        raise ScenarioError("spacecraft.mass_kg must equal the sum of the point masses")
    if np.linalg.norm(masses @ offsets) > 1e-9 * masses.sum():
        raise ScenarioError("spacecraft point masses must have their centre of mass at the origin")


def validate_config(raw: Any) -> dict[str, Any]:
    """Apply the schema and the cross-field invariants."""
    try:
        config = SCENARIO_SCHEMA(raw)
    except vol.Invalid as err:
        raise ScenarioError(f"Invalid scenario: {err}") from err
    check_invariants(config)
    return config


def _asteroid(config: dict[str, Any], base_dir: Path, rng: np.random.Generator) -> tuple[AsteroidModel, LandmarkCatalog]:
    cfg = config["asteroid"]
    if cfg["gravity_file"]:
        gravity = load_gravity_coefficients(base_dir / cfg["gravity_file"])
    else:
        syn = cfg["synthetic"]
        gravity = synthetic_gravity_model(
            cfg["mu_m3s2"], cfg["reference_radius_m"], syn["degree"], rng,
            c20=syn["c20"], c22=syn["c22"], s22=syn["s22"], high_degree_sigma=syn["high_degree_sigma"],
        )
    if cfg["landmarks_file"]:
        catalog = load_landmarks(base_dir / cfg["landmarks_file"])
    else:
        catalog = synthetic_landmarks(rng, cfg["landmark_count"], tuple(cfg["semi_axes_m"]))
    asteroid = AsteroidModel(gravity=gravity, spin_rate=2.0 * np.pi / cfg["spin_period_s"])
    return asteroid, catalog


def _spacecraft(cfg: dict[str, Any]) -> SpacecraftConfig:
    masses = MassDistribution(
        offsets=[pm["offset_m"] for pm in cfg["point_masses"]],
        masses=[pm["mass_kg"] for pm in cfg["point_masses"]],
    )
    return SpacecraftConfig.from_masses(
        masses,
        reflectivity=cfg["reflectivity"],
        area=cfg["srp_area_m2"],
        mass=cfg["mass_kg"],
        accel_max=np.full(3, cfg["accel_max_m_s2"]),
        torque_max=np.full(3, cfg["torque_max_n_m"]),
        actuator_rate=cfg["actuator_rate_1_s"],
        isp=cfg["isp_s"],
    )


def _navigation(config: dict[str, Any], integrator: IntegratorSettings) -> NavigationConfig:
    nav, sen = config["navigation"], config["sensors"]
    camera = CameraModel(
        focal_length=sen["focal_length_m"], resolution=sen["resolution_px"], fov=np.deg2rad(sen["fov_deg"])
    )
    suite = SensorSuite(
        camera=camera,
        pixel_sigma=sen["pixel_sigma_px"],
        lidar_sigma=sen["lidar_sigma_m"],
        star_tracker_sigma=sen["star_tracker_sigma_arcsec"] * ARCSEC,
        gyro_bias=np.asarray(sen["gyro_bias_deg_h"]) * DEG_PER_HOUR,
        gyro_sigma=sen["gyro_sigma_deg_h"] * DEG_PER_HOUR,
        tracked_landmarks=sen["tracked_landmarks"],
        quantization_variance=sen["quantization_variance"],
    )
    return NavigationConfig(
        orbit_degree=nav["orbit_degree"],
        attitude_degree=nav["attitude_degree"],
        ukf=UkfParams(alpha=nav["ukf_alpha"], theta=nav["ukf_theta"], beta=nav["ukf_beta"]),
        suite=suite,
        integrator=integrator,
    )


def build_scenario(config: dict[str, Any], base_dir: str | Path = ".") -> Scenario:
    """Validate a config mapping and assemble the mission and satellites."""
    config = validate_config(config)
    base_dir = Path(base_dir)
    env_rng = np.random.default_rng(np.random.SeedSequence([config["seed"], 0]))
    try:
        asteroid, catalog = _asteroid(config, base_dir, env_rng)
    except DataFileError as err:
        raise ScenarioError(f"Cannot load asteroid data: {err}") from err

    integrator = IntegratorSettings(max_step=config["navigation"]["attitude_interval_s"])
    try:
        spacecraft = _spacecraft(config["spacecraft"])
    except ValueError as err:
        raise ScenarioError(f"Invalid spacecraft: {err}") from err
    nav, ctrl = config["navigation"], config["control"]
    schedule = ScheduleConfig(
        duration=config["duration_s"],
        orbit_interval=nav["orbit_interval_s"],
        attitude_interval=nav["attitude_interval_s"],
        orbit_mpc_every=int(round(ctrl["orbit_horizon_s"] / ctrl["orbit_intervals"] / nav["orbit_interval_s"])),
        mode=config["mode"],
        attitude_write_back=config["attitude_write_back"],
    )
    sun = config["sun"]
    solar = SolarModel(sun_position=np.array([sun["distance_au"] * AU, 0.0, 0.0]), enabled=sun["enabled"])
    mission = Mission(asteroid, solar, catalog, _navigation(config, integrator), schedule, integrator)

    satellites = []
    for sat in config["satellites"]:
        try:
            x0 = classical_to_mee(
                ClassicalElements(
                    a=sat["a_target_m"], e=0.0, i=np.deg2rad(sat["inclination_deg"]),
                    raan=np.deg2rad(sat["raan_deg"]), argp=0.0, nu=np.deg2rad(sat["arg_latitude_deg"]),
                )
            )
        except GncError as err:
            raise ScenarioError(f"Satellite {sat['id']}: {err}") from err
        sigma_target = np.asarray(sat["sigma_bo_target"], dtype=float)
        truth = aligned_truth(x0, sigma_target, asteroid.mu)
        truth = replace(
            truth,
            accel=ActuatorProfile(rate=spacecraft.actuator_rate),
            torque=ActuatorProfile(rate=spacecraft.actuator_rate),
        )
        orbit_mpc = MpcConfig.orbit(
            sat["a_target_m"],
            intervals=ctrl["orbit_intervals"],
            dt=ctrl["orbit_horizon_s"] / ctrl["orbit_intervals"],
            gamma=ctrl["orbit_gamma"],
            u_max=spacecraft.accel_max,
            nullify_out_of_plane=config["nullify_out_of_plane"],
        )
        attitude_mpc = MpcConfig.attitude(
            intervals=ctrl["attitude_intervals"],
            dt=ctrl["attitude_horizon_s"] / ctrl["attitude_intervals"],
            gamma=ctrl["attitude_gamma"],
            u_max=spacecraft.torque_max,
        )
        satellites.append(
            SatelliteSetup(
                sat_id=sat["id"],
                initial=truth,
                spacecraft=spacecraft,
                a_target=sat["a_target_m"],
                orbit_mpc=orbit_mpc,
                attitude_mpc=attitude_mpc,
                sigma_target=sigma_target,
                perturb_initial=nav["perturb_initial"],
            )
        )
    _LOGGER.info(
        "Scenario %s: %d satellite(s), %.1f h, %s mode",
        config["name"], len(satellites), config["duration_s"] / 3600.0, config["mode"],
    )
    return Scenario(config["name"], config["seed"], config, mission, tuple(satellites), base_dir)


def load_scenario(path: str | Path) -> Scenario:
    """Read a YAML scenario; data file paths resolve against its directory."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as err:
        raise ScenarioError(f"Cannot read scenario {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ScenarioError(f"Malformed YAML in {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ScenarioError(f"Scenario {path} must be a mapping")
    return build_scenario(raw, path.parent)


def preset_names() -> list[str]:
    """Bundled scenario presets."""
    return sorted(
        entry.name.removesuffix(".yaml")
        for entry in resources.files(PRESET_PACKAGE).iterdir()
        if entry.name.endswith(".yaml")
    )


def preset_path(name: str) -> Path:
    """Filesystem path of a bundled preset."""
    candidate = resources.files(PRESET_PACKAGE) / f"{name}.yaml"
    if not candidate.is_file():
        raise ScenarioError(f"Unknown preset {name!r}; available: {', '.join(preset_names())}")
    return Path(str(candidate))
