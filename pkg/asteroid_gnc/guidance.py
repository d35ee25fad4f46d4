"""Closed circular orbit references and stationary attitude references."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .dynamics import IntegratorSettings, gve_rates
from .elements import Mee, Mrp, mrp_to_rotation, orbit_frame_angular_velocity
from .exceptions import IntegrationError
from .gravity import AsteroidModel, GravityModel, gravity_accel_orbit_frame

_LOGGER = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = leggauss(4)

TimeFn = Callable[[npt.ArrayLike], np.ndarray]


def interval_average(fn: TimeFn, t_start: npt.ArrayLike, t_end: npt.ArrayLike) -> np.ndarray:
    """Mean of fn over each [t_start, t_end] by 4-point Gauss–Legendre."""
    t_start = np.asarray(t_start, dtype=float)
    t_end = np.asarray(t_end, dtype=float)
    mid = 0.5 * (t_start + t_end)
    half = 0.5 * (t_end - t_start)
    samples = fn(mid[..., None] + half[..., None] * _GL_NODES)
    return 0.5 * np.einsum("k,...kj->...j", _GL_WEIGHTS, samples)


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """Reference states on a control grid plus dense evaluators.

    ``controls[k]`` is the reference control averaged over
    [times[k], times[k+1]].
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    state_fn: TimeFn
    control_fn: TimeFn

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0.0):
            raise ValueError("Reference time grid must be strictly increasing with at least two nodes")
        if self.states.shape[0] != times.size or self.controls.shape[0] != times.size - 1:
            raise ValueError("Reference states and controls do not match the grid")
        object.__setattr__(self, "times", times)

    @property
    def intervals(self) -> int:
        return self.times.size - 1

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def covers(self, t0: float, t1: float) -> bool:
        return self.start <= t0 and t1 <= self.end + 1e-9 * max(1.0, abs(self.end))


def project_to_target(x: Mee, a_target: float) -> np.ndarray:
    """Keep (h, k, L) of an estimate, impose p = ā and f = g = 0."""
    x = np.asarray(x, dtype=float)
    return np.array([a_target, 0.0, 0.0, x[3], x[4], x[5]])


def cancelling_control(
    x: Mee, t: npt.ArrayLike, gravity: GravityModel, asteroid: AsteroidModel
) -> np.ndarray:
    """In-plane control cancelling the estimated inhomogeneous gravity, no normal thrust."""
    accel = gravity_accel_orbit_frame(gravity, x, t, asteroid)
    return np.stack([-accel[..., 0], -accel[..., 1], np.zeros_like(accel[..., 2])], axis=-1)


def orbit_reference(
    start: Mee,
    gravity: GravityModel,
    a_target: float,
    horizon: float,
    intervals: int,
    asteroid: AsteroidModel,
    t0: float = 0.0,
    settings: IntegratorSettings | None = None,
) -> ReferenceTrajectory:
    """Circular orbit reference of radius ā whose plane drifts under the estimated field.

    Only (h, k, L) are integrated; the in-plane gravity is cancelled by the
    reference control so p, f and g stay frozen.
    """
    if intervals < 1 or horizon <= 0.0:
        raise ValueError("Reference needs a positive horizon and at least one interval")
    settings = settings or IntegratorSettings()
    x0 = project_to_target(start, a_target)
    mu = gravity.mu

    def full_state(hkl: np.ndarray) -> np.ndarray:
        hkl = np.moveaxis(np.asarray(hkl, dtype=float), 0, -1)
        frozen = np.broadcast_to(np.array([a_target, 0.0, 0.0]), hkl.shape[:-1] + (3,))
        return np.concatenate([frozen, hkl], axis=-1)

    def rhs(t: float, hkl: np.ndarray) -> np.ndarray:
        x = full_state(hkl)
        a_n = gravity_accel_orbit_frame(gravity, x, t, asteroid)[2]
        return gve_rates(x, np.array([0.0, 0.0, a_n]), mu)[3:]

    times = t0 + horizon / intervals * np.arange(intervals + 1)
    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        x0[3:],
        method=settings.method,
        rtol=settings.rtol,
        atol=settings.atol,
        t_eval=times,
        dense_output=True,
    )
    if not sol.success:
        _LOGGER.error("Orbit reference integration failed: %s", sol.message)
        raise IntegrationError(f"Orbit reference integration failed at t={t0}: {sol.message}")
    dense = sol.sol

    def state_fn(t: npt.ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return full_state(dense(t.ravel()).reshape((3,) + t.shape))

    def control_fn(t: npt.ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return cancelling_control(state_fn(t), t, gravity, asteroid)

    states = full_state(sol.y)
    controls = interval_average(control_fn, times[:-1], times[1:])
    _LOGGER.debug("Orbit reference over %.0f s: ΔL = %.4f rad", horizon, states[-1, 5] - states[0, 5])
    return ReferenceTrajectory(times, states, controls, state_fn, control_fn)


def attitude_reference(
    orbit_ref: ReferenceTrajectory,
    sigma_target: Mrp,
    asteroid: AsteroidModel,
    times: npt.ArrayLike | None = None,
    gravity: GravityModel | None = None,
) -> ReferenceTrajectory:
    """Fixed σ̄_BO with the body rate that keeps it stationary along the orbit reference.

    ω̄ = R(σ̄_BO)·ω_O/I. The normal gravity entering ω_O/I comes from
    ``gravity`` when given and is neglected otherwise.
    """
    sigma_target = np.asarray(sigma_target, dtype=float)
    rot = mrp_to_rotation(sigma_target)
    grid = orbit_ref.times if times is None else np.asarray(times, dtype=float)
    if not orbit_ref.covers(float(grid[0]), float(grid[-1])):
        raise ValueError("Attitude reference grid exceeds the orbit reference span")

    def state_fn(t: npt.ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = orbit_ref.state_fn(t)
        if gravity is None:
            a_n = np.zeros(t.shape)
        else:
            a_n = gravity_accel_orbit_frame(gravity, x, t, asteroid)[..., 2]
        omega = np.einsum("ij,...j->...i", rot, orbit_frame_angular_velocity(x, a_n, asteroid.mu))
        sigma = np.broadcast_to(sigma_target, omega.shape)
        return np.concatenate([sigma, omega], axis=-1)

    def control_fn(t: npt.ArrayLike) -> np.ndarray:
        return np.zeros(np.shape(t) + (3,))

    return ReferenceTrajectory(grid, state_fn(grid), np.zeros((grid.size - 1, 3)), state_fn, control_fn)
