"""Orbit and attitude navigation filters built on the generic UKF."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .const import (
    DEFAULT_ATTITUDE_DEGREE,
    DEFAULT_ORBIT_DEGREE,
    DEFAULT_SIGMA_BIAS,
    DEFAULT_SIGMA_GRAVITY,
    DEFAULT_SIGMA_MEE,
    DEFAULT_SIGMA_MRP,
    DEFAULT_SIGMA_P_M,
    DEFAULT_SIGMA_RATE,
    QUANTIZATION_VARIANCE_PX2,
)
from .dynamics import (
    ATTITUDE_DIM,
    ORBIT_DIM,
    ActuatorProfile,
    IntegratorSettings,
    SpacecraftConfig,
    attitude_process_flow,
    attitude_state_dim,
    orbit_process_flow,
    orbit_state_dim,
)
from .elements import Mee, Mrp, dcm_to_mrp, mrp_compose, mrp_shadow, rot_orbit_from_inertial
from .gravity import AsteroidModel, coefficient_count
from .sensors import LandmarkCatalog, SensorSuite, attitude_measurement_fn, orbit_measurement_fn
from .ukf import GaussianState, UkfDiagnostics, UkfNoise, UkfParams, ukf_step

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class InitialUncertainty:
    """1σ values of the initial navigation fix."""

    p: float = DEFAULT_SIGMA_P_M
    mee: float = DEFAULT_SIGMA_MEE
    gravity: float = DEFAULT_SIGMA_GRAVITY
    mrp: float = DEFAULT_SIGMA_MRP
    rate: float = DEFAULT_SIGMA_RATE
    bias: float = DEFAULT_SIGMA_BIAS


@dataclass(frozen=True)
class NavigationConfig:
    """Settings shared by the orbit and attitude filters of one satellite."""

    orbit_degree: int = DEFAULT_ORBIT_DEGREE
    attitude_degree: int = DEFAULT_ATTITUDE_DEGREE
    ukf: UkfParams = field(default_factory=UkfParams)
    suite: SensorSuite = field(default_factory=SensorSuite)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    initial: InitialUncertainty = field(default_factory=InitialUncertainty)

    def __post_init__(self) -> None:
        if self.attitude_degree > self.orbit_degree:
            raise ValueError("Attitude filter degree cannot exceed the orbit filter degree")


def initial_orbit_state(x_orb: Mee, config: NavigationConfig) -> GaussianState:
    """Orbit extended state with zero gravity estimate and the configured spread."""
    n_grav = coefficient_count(config.orbit_degree)
    sig = config.initial
    std = np.concatenate([[sig.p], np.full(5, sig.mee), np.full(n_grav, sig.gravity)])
    return GaussianState(np.concatenate([x_orb, np.zeros(n_grav)]), np.diag(std**2))


def initial_attitude_state(sigma_bi: Mrp, omega: np.ndarray, config: NavigationConfig) -> GaussianState:
    """Attitude extended state with zero gravity and bias estimates."""
    n_grav = coefficient_count(config.attitude_degree)
    sig = config.initial
    std = np.concatenate([np.full(3, sig.mrp), np.full(3, sig.rate), np.full(n_grav, sig.gravity), np.full(3, sig.bias)])
    mean = np.concatenate([sigma_bi, omega, np.zeros(n_grav), np.zeros(3)])
    return GaussianState(mean, np.diag(std**2))


def orbit_measurement_noise(suite: SensorSuite, n_landmarks: int) -> np.ndarray:
    """Q_z for pixel pairs and ranges of n landmarks."""
    pixel_var = suite.pixel_sigma**2 + (QUANTIZATION_VARIANCE_PX2 if suite.quantization_variance else 0.0)
    block = [pixel_var, pixel_var, suite.lidar_sigma**2]
    return np.diag(np.tile(block, n_landmarks))


def attitude_measurement_noise(suite: SensorSuite) -> np.ndarray:
    """Q_z for the star-tracker MRP and the gyro rate."""
    # random-axis error of angle σ: per-axis rotation variance σ²/3, MRP ≈ angle/4
    mrp_var = (suite.star_tracker_sigma / 4.0) ** 2 / 3.0
    return np.diag(np.concatenate([np.full(3, mrp_var), np.full(3, suite.gyro_sigma**2)]))


def pixel_centers(z_orb: np.ndarray) -> np.ndarray:
    """Shift integer pixel indices to pixel centers."""
    z = np.array(z_orb, dtype=float)
    z[0::3] += 0.5
    z[1::3] += 0.5
    return z


def reconstruct_body_orbit(sigma_bi: Mrp, x_orb: Mee) -> Mrp:
    """σ_BO from the inertial attitude and the orbit estimate."""
    sigma_oi = dcm_to_mrp(rot_orbit_from_inertial(x_orb))
    return mrp_compose(-sigma_oi, sigma_bi)


def orbit_filter_step(
    state: GaussianState,
    q_y: np.ndarray,
    z_orb: np.ndarray | None,
    sigma_bi: Mrp,
    accel: ActuatorProfile,
    landmark_ids: Sequence[str],
    catalog: LandmarkCatalog,
    t: float,
    dt: float,
    asteroid: AsteroidModel,
    config: NavigationConfig,
) -> tuple[GaussianState, np.ndarray, UkfDiagnostics]:
    """Propagate the orbit filter from t to t + dt and fuse landmark measurements."""
    degree = config.orbit_degree
    if state.dim != orbit_state_dim(degree):
        raise ValueError(f"Orbit filter state must have {orbit_state_dim(degree)} entries")
    positions = catalog.positions_of(landmark_ids) if landmark_ids else np.zeros((0, 3))

    def process(chi: np.ndarray) -> np.ndarray:
        return orbit_process_flow(chi, t, dt, accel, asteroid, degree, config.integrator)

    def measure(chi: np.ndarray) -> np.ndarray:
        return orbit_measurement_fn(chi, sigma_bi, positions, config.suite.camera, t + dt, asteroid)

    if z_orb is None or not landmark_ids:
        _LOGGER.debug("Orbit filter at t=%.1f: no landmarks, propagation only", t + dt)
        z, q_z = None, np.zeros((0, 0))
    else:
        z = pixel_centers(z_orb)
        q_z = orbit_measurement_noise(config.suite, len(landmark_ids))
    result = ukf_step(process, measure, state, z, UkfNoise(q_y, q_z), config.ukf, vectorized=True)
    return result.state, result.q_y, result.diagnostics


def _shadow_state(state: GaussianState) -> GaussianState:
    """Re-express the MRP block of an attitude state in its shadow set."""
    sigma = state.mean[:3]
    s2 = float(sigma @ sigma)
    jac = np.eye(state.dim)
    jac[:3, :3] = (2.0 * np.outer(sigma, sigma) - s2 * np.eye(3)) / s2**2
    mean = state.mean.copy()
    mean[:3] = mrp_shadow(sigma)
    return GaussianState(mean, jac @ state.cov @ jac.T)


def nearest_mrp(sigma: Mrp, reference: Mrp) -> np.ndarray:
    """The MRP set (original or shadow) closest to a reference."""
    sigma = np.asarray(sigma, dtype=float)
    if not sigma.any():
        return sigma
    shadow = mrp_shadow(sigma)
    if np.linalg.norm(shadow - reference) < np.linalg.norm(sigma - reference):
        return shadow
    return sigma


def _normalize_mrp(state: GaussianState) -> GaussianState:
    if float(state.mean[:3] @ state.mean[:3]) > 1.0:
        _LOGGER.debug("Attitude estimate switched to the MRP shadow set")
        return _shadow_state(state)
    return state


def attitude_filter_step(
    state: GaussianState,
    q_y: np.ndarray,
    z_att: np.ndarray,
    x_orb: Mee,
    torque: ActuatorProfile,
    t: float,
    dt: float,
    cfg: SpacecraftConfig,
    asteroid: AsteroidModel,
    config: NavigationConfig,
    accel: ActuatorProfile | None = None,
) -> tuple[GaussianState, np.ndarray, UkfDiagnostics]:
    """Propagate the attitude filter from t to t + dt and fuse star-tracker/gyro data."""
    degree = config.attitude_degree
    if state.dim != attitude_state_dim(degree):
        raise ValueError(f"Attitude filter state must have {attitude_state_dim(degree)} entries")
    state = _normalize_mrp(state)

    z = np.array(z_att, dtype=float)
    z[:3] = nearest_mrp(z[:3], state.mean[:3])

    def process(chi: np.ndarray) -> np.ndarray:
        return attitude_process_flow(chi, t, dt, x_orb, torque, cfg, asteroid, degree, config.integrator, accel)

    noise = UkfNoise(q_y, attitude_measurement_noise(config.suite))
    result = ukf_step(process, attitude_measurement_fn, state, z, noise, config.ukf, vectorized=True)
    return _normalize_mrp(result.state), result.q_y, result.diagnostics


class _Navigator:
    """Filter state holder with a gravity block at a fixed offset."""

    def __init__(self, state: GaussianState, gravity_offset: int, degree: int) -> None:
        self.state = state
        self.q_y = np.zeros((state.dim, state.dim))
        self.degree = degree
        self._grav = slice(gravity_offset, gravity_offset + coefficient_count(degree))
        self.last_diagnostics: UkfDiagnostics | None = None

    @property
    def gravity_mean(self) -> np.ndarray:
        return self.state.mean[self._grav].copy()

    @property
    def gravity_std(self) -> np.ndarray:
        return self.state.std()[self._grav]

    def set_gravity_mean(self, values: np.ndarray) -> None:
        """Overwrite the leading gravity entries of the mean; covariance untouched."""
        mean = self.state.mean.copy()
        count = min(len(values), self._grav.stop - self._grav.start)
        mean[self._grav.start:self._grav.start + count] = values[:count]
        self.state = GaussianState(mean, self.state.cov)


class OrbitNavigator(_Navigator):
    """Orbit filter of one satellite."""

    def __init__(self, x_orb: Mee, config: NavigationConfig) -> None:
        super().__init__(initial_orbit_state(x_orb, config), ORBIT_DIM, config.orbit_degree)
        self.config = config

    @property
    def mee(self) -> np.ndarray:
        return self.state.mean[:ORBIT_DIM].copy()

    def step(self, z_orb, sigma_bi, accel, landmark_ids, catalog, t, dt, asteroid) -> None:
        """Run one orbit filter call in place."""
        self.state, self.q_y, self.last_diagnostics = orbit_filter_step(
            self.state, self.q_y, z_orb, sigma_bi, accel, landmark_ids, catalog, t, dt, asteroid, self.config
        )


class AttitudeNavigator(_Navigator):
    """Attitude filter of one satellite."""

    def __init__(self, sigma_bi: Mrp, omega: np.ndarray, config: NavigationConfig) -> None:
        super().__init__(initial_attitude_state(sigma_bi, omega, config), ATTITUDE_DIM, config.attitude_degree)
        self.config = config

    @property
    def sigma_bi(self) -> np.ndarray:
        return self.state.mean[:3].copy()

    @property
    def omega(self) -> np.ndarray:
        return self.state.mean[3:6].copy()

    @property
    def gyro_bias(self) -> np.ndarray:
        return self.state.mean[-3:].copy()

    def step(self, z_att, x_orb, torque, t, dt, cfg, asteroid, accel=None) -> None:
        """Run one attitude filter call in place."""
        self.state, self.q_y, self.last_diagnostics = attitude_filter_step(
            self.state, self.q_y, z_att, x_orb, torque, t, dt, cfg, asteroid, self.config, accel
        )
