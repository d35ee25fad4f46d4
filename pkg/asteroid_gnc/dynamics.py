"""Truth and process propagation for the coupled orbit-attitude motion."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.typing as npt
from scipy.integrate import solve_ivp

from .const import (
    DEFAULT_ACCEL_MAX,
    DEFAULT_ACTUATOR_RATE,
    DEFAULT_ATOL,
    DEFAULT_ATOL_P,
    DEFAULT_ATTITUDE_INTERVAL_S,
    DEFAULT_INTEGRATOR,
    DEFAULT_ISP_S,
    DEFAULT_MASS_KG,
    DEFAULT_REFLECTIVITY,
    DEFAULT_RTOL,
    DEFAULT_SRP_AREA_M2,
    DEFAULT_TORQUE_MAX,
)
from .elements import (
    Mee,
    Mrp,
    mee_position,
    mrp_kinematics_matrix,
    mrp_switch,
    mrp_to_rotation,
    orbit_frame_angular_velocity,
    rot_orbit_from_inertial,
)
from .exceptions import IntegrationError
from .gravity import (
    AsteroidModel,
    GravityModel,
    MassDistribution,
    SolarModel,
    coefficient_count,
    gravity_accel_orbit_frame,
    gravity_gradient_torque_body,
    srp_accel,
    sun_third_body,
    unpack_coefficients,
)

_LOGGER = logging.getLogger(__name__)

ORBIT_DIM = 6
ATTITUDE_DIM = 6
BIAS_DIM = 3


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed integrator settings shared by truth and process propagation.

    ``max_step`` caps the solver step at the attitude sensor interval.
    """

    method: str = DEFAULT_INTEGRATOR
    rtol: float = DEFAULT_RTOL
    atol_p: float = DEFAULT_ATOL_P
    atol: float = DEFAULT_ATOL
    max_step: float = DEFAULT_ATTITUDE_INTERVAL_S

    def orbit_atol(self) -> np.ndarray:
        return np.array([self.atol_p] + [self.atol] * 5)


@dataclass(frozen=True, eq=False)
class SpacecraftConfig:
    """Rigid spacecraft with thrusters and reaction torques."""

    inertia: np.ndarray
    masses: MassDistribution
    reflectivity: float = DEFAULT_REFLECTIVITY
    area: float = DEFAULT_SRP_AREA_M2
    mass: float = DEFAULT_MASS_KG
    accel_max: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_ACCEL_MAX))
    torque_max: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_TORQUE_MAX))
    actuator_rate: float = DEFAULT_ACTUATOR_RATE
    isp: float = DEFAULT_ISP_S

    def __post_init__(self) -> None:
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-9 * np.abs(inertia).max()):
            raise ValueError("Inertia must be a symmetric 3x3 matrix")
        if np.any(np.linalg.eigvalsh(inertia) <= 0.0):
            raise ValueError("Inertia must be positive definite")
        derived = self.masses.inertia()
        if np.max(np.abs(derived - inertia)) > 1e-6 * np.abs(inertia).max():
            raise ValueError("Inertia is not consistent with the point-mass distribution")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "accel_max", np.broadcast_to(np.asarray(self.accel_max, float), (3,)).copy())
        object.__setattr__(self, "torque_max", np.broadcast_to(np.asarray(self.torque_max, float), (3,)).copy())

    @classmethod
    def from_masses(cls, masses: MassDistribution, **kwargs) -> SpacecraftConfig:
        """Build a configuration whose inertia is derived from the point masses."""
        return cls(inertia=masses.inertia(), masses=masses, **kwargs)

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.linalg.inv(self.inertia)


@dataclass(frozen=True, eq=False)
class ActuatorProfile:
    """First-order actuator response to a piecewise-constant command."""

    command: np.ndarray = field(default_factory=lambda: np.zeros(3))
    start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_switch: float = 0.0
    rate: float = DEFAULT_ACTUATOR_RATE

    def value(self, t: npt.ArrayLike) -> np.ndarray:
        """Applied actuator output at time t."""
        t = np.asarray(t, dtype=float)
        decay = np.exp(-self.rate * np.clip(t - self.t_switch, 0.0, None))
        return self.command + decay[..., None] * (self.start - self.command)

    def commanded(self, command: npt.ArrayLike, t: float) -> ActuatorProfile:
        """Profile after a (possibly unchanged) command issued at time t."""
        command = np.asarray(command, dtype=float)
        if np.array_equal(command, self.command):
            return self
        return replace(self, command=command.copy(), start=self.value(t), t_switch=t)


@dataclass(frozen=True, eq=False)
class TruthState:
    """True orbit, inertial attitude, actuator states and clock."""

    x_orb: Mee
    sigma_bi: Mrp
    omega: np.ndarray
    t: float = 0.0
    accel: ActuatorProfile = field(default_factory=ActuatorProfile)
    torque: ActuatorProfile = field(default_factory=ActuatorProfile)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    dt: float,
    settings: IntegratorSettings,
    atol: npt.ArrayLike,
) -> np.ndarray:
    """Integrate rhs over [t0, t0 + dt] and return the final state."""
    if dt <= 0.0:
        raise ValueError(f"Propagation interval must be positive, got {dt}")
    sol = solve_ivp(
        rhs,
        (t0, t0 + dt),
        y0,
        method=settings.method,
        rtol=settings.rtol,
        atol=atol,
        max_step=settings.max_step,
    )
    if not sol.success:
        _LOGGER.error("Integration failed on [%s, %s]: %s", t0, t0 + dt, sol.message)
        raise IntegrationError(f"Integration failed at t={t0}: {sol.message}")
    return sol.y[:, -1]


def gve_rates(x: Mee, a_pert: npt.ArrayLike, mu: float) -> np.ndarray:
    """Gauss variational equations in modified equinoctial elements."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a_pert, dtype=float)
    p, f, g, h, k, L = np.moveaxis(x, -1, 0)
    a_r, a_t, a_n = np.moveaxis(np.broadcast_to(a, x.shape[:-1] + (3,)), -1, 0)
    cos_l, sin_l = np.cos(L), np.sin(L)
    w = 1.0 + f * cos_l + g * sin_l
    if np.any(w <= 0.0):
        raise IntegrationError("Rectilinear degeneracy (w <= 0) in equinoctial rates")
    s2 = 1.0 + h**2 + k**2
    sq = np.sqrt(p / mu)
    out_of_plane = h * sin_l - k * cos_l
    return np.stack(
        [
            2.0 * p / w * sq * a_t,
            sq * (a_r * sin_l + ((w + 1.0) * cos_l + f) * a_t / w - out_of_plane * g * a_n / w),
            sq * (-a_r * cos_l + ((w + 1.0) * sin_l + g) * a_t / w + out_of_plane * f * a_n / w),
            sq * s2 * a_n * cos_l / (2.0 * w),
            sq * s2 * a_n * sin_l / (2.0 * w),
            np.sqrt(mu * p) * (w / p) ** 2 + sq * out_of_plane * a_n / w,
        ],
        axis=-1,
    )


def attitude_rates(
    sigma: Mrp,
    omega: np.ndarray,
    torque_u: npt.ArrayLike,
    x: Mee,
    cfg: SpacecraftConfig,
    model: GravityModel,
    asteroid: AsteroidModel,
    t: float,
    *,
    relative_to_orbit: bool = False,
    coefficients: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """MRP and body-rate derivatives under gravity-gradient and control torques.

    With ``relative_to_orbit`` the MRP is σ_BO and its rate subtracts the
    orbit-frame rotation; otherwise it is σ_BI.
    """
    sigma = np.asarray(sigma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    c, s = coefficients if coefficients is not None else (model.c, model.s)
    rot_sigma = mrp_to_rotation(sigma)
    rot_oi = rot_orbit_from_inertial(x)
    rot_bi = rot_sigma @ rot_oi if relative_to_orbit else rot_sigma
    angle = asteroid.rotation_angle(t)

    torque = gravity_gradient_torque_body(
        model.mu, model.radius, c, s, cfg.masses, mee_position(x), rot_bi, angle
    ) + np.asarray(torque_u, dtype=float)
    j_omega = np.einsum("ij,...j->...i", cfg.inertia, omega)
    omega_dot = np.einsum("ij,...j->...i", cfg.inertia_inv, torque - np.cross(omega, j_omega))

    rel_rate = omega
    if relative_to_orbit:
        a_n = gravity_accel_orbit_frame(model, x, t, asteroid, coefficients=(c, s))[..., 2]
        omega_oi = orbit_frame_angular_velocity(x, a_n, model.mu)
        rel_rate = omega - np.einsum("...ij,...j->...i", rot_sigma, omega_oi)
    sigma_dot = 0.25 * np.einsum("...ij,...j->...i", mrp_kinematics_matrix(sigma), rel_rate)
    return sigma_dot, omega_dot


def propagate_truth(
    state: TruthState,
    accel_cmd: npt.ArrayLike,
    torque_cmd: npt.ArrayLike,
    dt: float,
    cfg: SpacecraftConfig,
    asteroid: AsteroidModel,
    solar: SolarModel,
    settings: IntegratorSettings,
) -> TruthState:
    """Jointly propagate the true orbit and attitude over dt."""
    accel = state.accel.commanded(accel_cmd, state.t)
    torque = state.torque.commanded(torque_cmd, state.t)
    model = asteroid.gravity

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:6]
        a = gravity_accel_orbit_frame(model, x, t, asteroid) + accel.value(t)
        if solar.enabled:
            a = a + sun_third_body(x, solar) + srp_accel(x, solar, cfg.reflectivity, cfg.area, cfg.mass)
        sigma_dot, omega_dot = attitude_rates(y[6:9], y[9:12], torque.value(t), x, cfg, model, asteroid, t)
        return np.concatenate([gve_rates(x, a, model.mu), sigma_dot, omega_dot])

    y0 = np.concatenate([state.x_orb, state.sigma_bi, state.omega])
    atol = np.concatenate([settings.orbit_atol(), np.full(6, settings.atol)])
    y1 = integrate(rhs, state.t, y0, dt, settings, atol)
    return TruthState(
        x_orb=y1[:6],
        sigma_bi=mrp_switch(y1[6:9]),
        omega=y1[9:12],
        t=state.t + dt,
        accel=accel,
        torque=torque,
    )


def orbit_state_dim(degree: int) -> int:
    return ORBIT_DIM + coefficient_count(degree)


def attitude_state_dim(degree: int) -> int:
    return ATTITUDE_DIM + coefficient_count(degree) + BIAS_DIM


def orbit_process_flow(
    y0: npt.ArrayLike,
    t0: float,
    dt: float,
    accel: ActuatorProfile,
    asteroid: AsteroidModel,
    degree: int,
    settings: IntegratorSettings,
) -> np.ndarray:
    """Propagate orbit extended states (one per row) under their own gravity blocks."""
    y0 = np.asarray(y0, dtype=float)
    if y0.shape[-1] != orbit_state_dim(degree):
        raise ValueError(f"Orbit extended state must have {orbit_state_dim(degree)} entries")
    batch = np.atleast_2d(y0)
    n_pts = batch.shape[0]
    coefficients = unpack_coefficients(batch[:, ORBIT_DIM:], degree)
    model = asteroid.gravity

    def rhs(t: float, flat: np.ndarray) -> np.ndarray:
        x = flat.reshape(n_pts, ORBIT_DIM)
        a = gravity_accel_orbit_frame(model, x, t, asteroid, coefficients=coefficients) + accel.value(t)
        return gve_rates(x, a, model.mu).ravel()

    atol = np.tile(settings.orbit_atol(), n_pts)
    x1 = integrate(rhs, t0, batch[:, :ORBIT_DIM].ravel(), dt, settings, atol).reshape(n_pts, ORBIT_DIM)
    out = batch.copy()
    out[:, :ORBIT_DIM] = x1
    return out.reshape(y0.shape)


def attitude_process_flow(
    y0: npt.ArrayLike,
    t0: float,
    dt: float,
    x_orb: Mee,
    torque: ActuatorProfile,
    cfg: SpacecraftConfig,
    asteroid: AsteroidModel,
    degree: int,
    settings: IntegratorSettings,
    accel: ActuatorProfile | None = None,
) -> np.ndarray:
    """Propagate attitude extended states [σ_BI, ω, gravity, bias] (one per row).

    Each row carries its own companion orbit, started from ``x_orb``.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape[-1] != attitude_state_dim(degree):
        raise ValueError(f"Attitude extended state must have {attitude_state_dim(degree)} entries")
    batch = np.atleast_2d(y0)
    n_pts = batch.shape[0]
    n_grav = coefficient_count(degree)
    c, s = unpack_coefficients(batch[:, ATTITUDE_DIM:ATTITUDE_DIM + n_grav], degree)
    model = asteroid.gravity
    accel = accel or ActuatorProfile()
    width = ORBIT_DIM + ATTITUDE_DIM

    def rhs(t: float, flat: np.ndarray) -> np.ndarray:
        y = flat.reshape(n_pts, width)
        x = y[:, :ORBIT_DIM]
        a = gravity_accel_orbit_frame(model, x, t, asteroid, coefficients=(c, s)) + accel.value(t)
        sigma_dot, omega_dot = attitude_rates(
            y[:, 6:9], y[:, 9:12], torque.value(t), x, cfg, model, asteroid, t, coefficients=(c, s)
        )
        return np.concatenate([gve_rates(x, a, model.mu), sigma_dot, omega_dot], axis=-1).ravel()

    start = np.concatenate([np.broadcast_to(np.asarray(x_orb, float), (n_pts, ORBIT_DIM)), batch[:, :ATTITUDE_DIM]], axis=1)
    atol = np.tile(np.concatenate([settings.orbit_atol(), np.full(ATTITUDE_DIM, settings.atol)]), n_pts)
    y1 = integrate(rhs, t0, start.ravel(), dt, settings, atol).reshape(n_pts, width)
    out = batch.copy()
    out[:, :ATTITUDE_DIM] = y1[:, ORBIT_DIM:]
    return out.reshape(y0.shape)
