"""Epoch coordinator for one or many satellites sharing a gravity estimate."""
from __future__ import annotations

import asyncio
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .const import (
    DEFAULT_ATTITUDE_INTERVAL_S,
    DEFAULT_ORBIT_INTERVAL_S,
    MODE_LEARNING,
    MODES,
)
from .dynamics import (
    IntegratorSettings,
    SpacecraftConfig,
    TruthState,
    orbit_process_flow,
    propagate_truth,
)
from .elements import (
    Mee,
    Mrp,
    dcm_to_mrp,
    mrp_compose,
    mrp_to_rotation,
    orbit_frame_angular_velocity,
    rot_orbit_from_inertial,
)
from .exceptions import SatelliteFailure
from .gravity import AsteroidModel, GravityModel, SolarModel, coefficient_count
from .mpc import MpcConfig, MpcPlan, mpc_step_attitude, mpc_step_orbit
from .navfilters import AttitudeNavigator, NavigationConfig, OrbitNavigator, reconstruct_body_orbit
from .sensors import LandmarkCatalog, select_landmarks, simulate_attitude_measurement, simulate_orbit_measurement

if TYPE_CHECKING:
    from .scenario import Scenario

_LOGGER = logging.getLogger(__name__)

SIGMA_FLOOR = 1.0e-15


@dataclass(frozen=True)
class ScheduleConfig:
    """Timing of the nested navigation and control loops."""

    duration: float
    orbit_interval: float = DEFAULT_ORBIT_INTERVAL_S
    attitude_interval: float = DEFAULT_ATTITUDE_INTERVAL_S
    orbit_mpc_every: int = 10
    attitude_mpc_every: int = 1
    mode: str = MODE_LEARNING
    attitude_write_back: bool = True

    def __post_init__(self) -> None:
        if self.duration <= 0.0 or self.orbit_interval <= 0.0 or self.attitude_interval <= 0.0:
            raise ValueError("Durations and sampling intervals must be positive")
        ratio = self.orbit_interval / self.attitude_interval
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("Orbit interval must be an integer multiple of the attitude interval")
        if self.mode not in MODES:
            raise ValueError(f"Unknown mode {self.mode!r}")
        if self.orbit_mpc_every < 1 or self.attitude_mpc_every < 1:
            raise ValueError("Controller cadences must be at least one epoch")

    @property
    def attitude_substeps(self) -> int:
        return int(round(self.orbit_interval / self.attitude_interval))

    @property
    def epochs(self) -> int:
        return int(round(self.duration / self.orbit_interval))


@dataclass(frozen=True, eq=False)
class Mission:
    """Environment and settings shared by every satellite."""

    asteroid: AsteroidModel
    solar: SolarModel
    catalog: LandmarkCatalog
    navigation: NavigationConfig
    schedule: ScheduleConfig
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)

    def navigation_asteroid(self) -> AsteroidModel:
        """What the filters and controllers know: μ, radius and spin only."""
        gravity = self.asteroid.gravity
        return self.asteroid.with_gravity(
            GravityModel.point_mass(gravity.mu, gravity.radius, self.navigation.orbit_degree)
        )


@dataclass(frozen=True, eq=False)
class SatelliteSetup:
    """Per-satellite initial truth, target and controllers."""

    sat_id: str
    initial: TruthState
    spacecraft: SpacecraftConfig
    a_target: float
    orbit_mpc: MpcConfig
    attitude_mpc: MpcConfig
    sigma_target: np.ndarray = field(default_factory=lambda: np.zeros(3))
    perturb_initial: bool = False


@dataclass(frozen=True, eq=False)
class EpochSnapshot:
    """State of one satellite at the end of an epoch."""

    t: float
    x_true: np.ndarray
    x_est: np.ndarray
    sigma_bi_true: np.ndarray
    sigma_bi_est: np.ndarray
    sigma_bo_true: np.ndarray
    sigma_bo_est: np.ndarray
    omega_true: np.ndarray
    omega_est: np.ndarray
    gyro_bias_est: np.ndarray
    accel_cmd: np.ndarray
    accel_applied: np.ndarray
    torque_cmd: np.ndarray
    torque_applied: np.ndarray
    gravity_est: np.ndarray
    gravity_std: np.ndarray
    landmarks: int


class FusionInput(NamedTuple):
    """One filter's gravity means and marginal 1σ, leading coefficients only."""

    mean: np.ndarray
    std: np.ndarray


class FusedGravity(NamedTuple):
    """Inverse-variance fused coefficients."""

    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray


class FusedRecord(NamedTuple):
    t: float
    mean: np.ndarray
    std: np.ndarray


class EpochProgress(NamedTuple):
    """Snapshot handed to coordinator listeners."""

    epoch: int
    epochs: int
    t: float
    fused: FusedGravity


@dataclass
class ConstellationResult:
    """Per-satellite histories and the fused gravity history."""

    histories: dict[str, list[EpochSnapshot]]
    fused: list[FusedRecord]
    degree: int


def fuse_gravity(inputs: Sequence[FusionInput], size: int | None = None) -> FusedGravity:
    """Per-coefficient inverse-variance average.

    Inputs shorter than ``size`` contribute to their leading coefficients
    only. The fused 1σ is the weighted spread, σ² = Σ w σ_η².
    """
    if not inputs:
        raise ValueError("Fusion needs at least one estimate")
    size = max(len(item.mean) for item in inputs) if size is None else size
    means = np.zeros((len(inputs), size))
    variances = np.zeros((len(inputs), size))
    inv_var = np.zeros((len(inputs), size))
    for row, item in enumerate(inputs):
        count = min(len(item.mean), size)
        std = np.maximum(np.asarray(item.std[:count], dtype=float), SIGMA_FLOOR)
        means[row, :count] = item.mean[:count]
        variances[row, :count] = std**2
        inv_var[row, :count] = 1.0 / std**2
    total = inv_var.sum(axis=0)
    if np.any(total == 0.0):
        raise ValueError("Some coefficients have no contributing estimate")
    weights = inv_var / total
    return FusedGravity(np.sum(weights * means, axis=0), np.sqrt(np.sum(weights * variances, axis=0)), weights)


def aligned_truth(x_orb: Mee, sigma_bo: Mrp, mu: float, t: float = 0.0) -> TruthState:
    """Truth state with the body at σ_BO in the orbit frame and rotating with it."""
    sigma_oi = dcm_to_mrp(rot_orbit_from_inertial(x_orb))
    sigma_bi = mrp_compose(sigma_oi, sigma_bo)
    omega = mrp_to_rotation(sigma_bo) @ orbit_frame_angular_velocity(x_orb, 0.0, mu)
    return TruthState(x_orb=np.asarray(x_orb, dtype=float), sigma_bi=sigma_bi, omega=omega, t=t)


class SatelliteRuntime:
    """Truth, filters and controllers of one satellite."""

    def __init__(self, setup: SatelliteSetup, mission: Mission, rng: np.random.Generator) -> None:
        self.setup = setup
        self.mission = mission
        self.rng = rng
        self.truth = setup.initial
        self.nav_asteroid = mission.navigation_asteroid()
        nav = mission.navigation
        x_hat, sigma_hat, omega_hat = setup.initial.x_orb, setup.initial.sigma_bi, setup.initial.omega
        if setup.perturb_initial:
            sig = nav.initial
            x_hat = x_hat + np.concatenate([[sig.p], np.full(5, sig.mee)]) * rng.standard_normal(6)
            sigma_hat = sigma_hat + sig.mrp * rng.standard_normal(3)
            omega_hat = omega_hat + sig.rate * rng.standard_normal(3)
        self.orbit_nav = OrbitNavigator(x_hat, nav)
        self.attitude_nav = AttitudeNavigator(sigma_hat, omega_hat, nav)
        self.nav_orbit = self.orbit_nav.mee
        self.orbit_plan: MpcPlan | None = None
        self.attitude_plan: MpcPlan | None = None
        self.accel_cmd = np.zeros(3)
        self.torque_cmd = np.zeros(3)
        self.landmarks = 0
        self.history: list[EpochSnapshot] = []

    @property
    def sat_id(self) -> str:
        return self.setup.sat_id

    @property
    def learning(self) -> bool:
        return self.mission.schedule.mode == MODE_LEARNING

    def control_gravity(self, navigator: OrbitNavigator | AttitudeNavigator) -> GravityModel:
        """Gravity model the controllers plan with: the estimate, or point mass when not learning."""
        base = GravityModel.point_mass(self.nav_asteroid.mu, self.nav_asteroid.gravity.radius, navigator.degree)
        if not self.learning:
            return base
        return base.with_packed(navigator.gravity_mean)

    def fusion_inputs(self) -> list[FusionInput]:
        return [
            FusionInput(self.orbit_nav.gravity_mean, self.orbit_nav.gravity_std),
            FusionInput(self.attitude_nav.gravity_mean, self.attitude_nav.gravity_std),
        ]

    def apply_fused(self, fused: FusedGravity) -> None:
        """Overwrite filter gravity means with the fused values."""
        self.orbit_nav.set_gravity_mean(fused.mean)
        if self.mission.schedule.attitude_write_back:
            self.attitude_nav.set_gravity_mean(fused.mean)

    def _plan_orbit(self, t: float) -> None:
        warm = self.orbit_plan.shifted_warm_start() if self.orbit_plan is not None else None
        self.orbit_plan = mpc_step_orbit(
            self.orbit_nav.mee,
            self.control_gravity(self.orbit_nav),
            self.setup.a_target,
            t,
            self.nav_asteroid,
            self.setup.orbit_mpc,
            warm_start=warm,
        )

    def _plan_attitude(self, t: float) -> None:
        warm = self.attitude_plan.shifted_warm_start() if self.attitude_plan is not None else None
        sigma_bo = reconstruct_body_orbit(self.attitude_nav.sigma_bi, self.nav_orbit)
        self.attitude_plan = mpc_step_attitude(
            sigma_bo,
            self.attitude_nav.omega,
            self.orbit_plan.reference,
            self.control_gravity(self.attitude_nav),
            self.setup.sigma_target,
            t,
            self.setup.spacecraft,
            self.nav_asteroid,
            self.setup.attitude_mpc,
            warm_start=warm,
        )

    def run_epoch(self, epoch: int) -> None:
        """Controllers, attitude ticks and one orbit filter call over one orbit interval."""
        schedule = self.mission.schedule
        nav = self.mission.navigation
        t0 = epoch * schedule.orbit_interval
        if epoch % schedule.orbit_mpc_every == 0 or self.orbit_plan is None:
            self._plan_orbit(t0)
        if epoch % schedule.attitude_mpc_every == 0 or self.attitude_plan is None:
            self._plan_attitude(t0)

        ticks = t0 + schedule.attitude_interval * np.arange(schedule.attitude_substeps + 1)
        ticks[-1] = (epoch + 1) * schedule.orbit_interval
        for t, t_next in zip(ticks[:-1], ticks[1:]):
            t, dt_att = float(t), float(t_next - t)
            self.accel_cmd = self.orbit_plan.command_at(t)
            self.torque_cmd = self.attitude_plan.command_at(t)
            propagated = propagate_truth(
                self.truth,
                self.accel_cmd,
                self.torque_cmd,
                dt_att,
                self.setup.spacecraft,
                self.mission.asteroid,
                self.mission.solar,
                self.mission.integrator,
            )
            # clock stays on the schedule grid
            self.truth = replace(propagated, t=float(t_next))
            z_att = simulate_attitude_measurement(self.truth, nav.suite, self.rng)
            self.attitude_nav.step(
                z_att, self.nav_orbit, self.truth.torque, t, dt_att,
                self.setup.spacecraft, self.nav_asteroid, accel=self.truth.accel,
            )
            extended = np.concatenate([self.nav_orbit, self.orbit_nav.gravity_mean])
            self.nav_orbit = orbit_process_flow(
                extended, t, dt_att, self.truth.accel, self.nav_asteroid, nav.orbit_degree, nav.integrator
            )[:6]

        ids = select_landmarks(
            self.mission.catalog,
            self.truth.x_orb,
            self.truth.sigma_bi,
            nav.suite.camera,
            nav.suite.tracked_landmarks,
            self.truth.t,
            self.mission.asteroid,
        )
        z_orb = None
        if ids:
            z_orb = simulate_orbit_measurement(
                self.truth, ids, self.mission.catalog, nav.suite, self.mission.asteroid, self.rng
            )
        self.landmarks = len(ids)
        self.orbit_nav.step(
            z_orb, self.attitude_nav.sigma_bi, self.truth.accel, ids, self.mission.catalog,
            t0, schedule.orbit_interval, self.nav_asteroid,
        )
        self.nav_orbit = self.orbit_nav.mee

    def snapshot(self) -> EpochSnapshot:
        truth = self.truth
        return EpochSnapshot(
            t=truth.t,
            x_true=truth.x_orb.copy(),
            x_est=self.orbit_nav.mee,
            sigma_bi_true=truth.sigma_bi.copy(),
            sigma_bi_est=self.attitude_nav.sigma_bi,
            sigma_bo_true=reconstruct_body_orbit(truth.sigma_bi, truth.x_orb),
            sigma_bo_est=reconstruct_body_orbit(self.attitude_nav.sigma_bi, self.orbit_nav.mee),
            omega_true=truth.omega.copy(),
            omega_est=self.attitude_nav.omega,
            gyro_bias_est=self.attitude_nav.gyro_bias,
            accel_cmd=self.accel_cmd.copy(),
            accel_applied=truth.accel.value(truth.t),
            torque_cmd=self.torque_cmd.copy(),
            torque_applied=truth.torque.value(truth.t),
            gravity_est=self.orbit_nav.gravity_mean,
            gravity_std=self.orbit_nav.gravity_std,
            landmarks=self.landmarks,
        )

    def record(self) -> None:
        self.history.append(self.snapshot())


def _fuse_runtimes(runtimes: Sequence[SatelliteRuntime], degree: int) -> FusedGravity:
    inputs = [item for runtime in runtimes for item in runtime.fusion_inputs()]
    fused = fuse_gravity(inputs, coefficient_count(degree))
    for runtime in runtimes:
        runtime.apply_fused(fused)
    return fused


def _initial_fused(runtimes: Sequence[SatelliteRuntime], degree: int) -> FusedGravity:
    inputs = [item for runtime in runtimes for item in runtime.fusion_inputs()]
    return fuse_gravity(inputs, coefficient_count(degree))


class ConstellationCoordinator:
    """Advance every satellite in lock-step epochs with a fusion barrier.

    Satellite epochs run in an executor; fusion, recording and listener
    notification happen on the event loop once all satellites finish.
    """

    def __init__(
        self,
        runtimes: Sequence[SatelliteRuntime],
        mission: Mission,
        executor: Executor | None = None,
    ) -> None:
        if not runtimes:
            raise ValueError("Coordinator needs at least one satellite")
        ids = [runtime.sat_id for runtime in runtimes]
        if len(set(ids)) != len(ids):
            raise ValueError("Satellite ids must be unique")
        self.runtimes = list(runtimes)
        self.mission = mission
        self._executor = executor
        self._listeners: list[Callable[[EpochProgress], None]] = []
        self.fused_history: list[FusedRecord] = []
        self.epoch = 0

    def add_listener(self, callback: Callable[[EpochProgress], None]) -> Callable[[], None]:
        """Register a per-epoch callback; returns a function that removes it."""
        self._listeners.append(callback)

        def remove() -> None:
            if callback in self._listeners:
                self._listeners.remove(callback)

        return remove

    def _notify(self, progress: EpochProgress) -> None:
        for callback in list(self._listeners):
            try:
                callback(progress)
            except Exception:  # noqa: BLE001
                _LOGGER.exception("Error in epoch listener")

    async def _async_run_epoch(self, epoch: int) -> FusedGravity:
        loop = asyncio.get_running_loop()
        t0 = epoch * self.mission.schedule.orbit_interval
        results = await asyncio.gather(
            *(loop.run_in_executor(self._executor, runtime.run_epoch, epoch) for runtime in self.runtimes),
            return_exceptions=True,
        )
        for runtime, result in zip(self.runtimes, results):
            if isinstance(result, Exception):
                _LOGGER.error("Satellite %s failed in epoch %d: %s", runtime.sat_id, epoch, result)
                raise SatelliteFailure(runtime.sat_id, t0, str(result)) from result
        return _fuse_runtimes(self.runtimes, self.mission.navigation.orbit_degree)

    async def async_run(self) -> ConstellationResult:
        """Run the whole schedule."""
        schedule = self.mission.schedule
        degree = self.mission.navigation.orbit_degree
        if self.epoch == 0:
            for runtime in self.runtimes:
                runtime.record()
            fused = _initial_fused(self.runtimes, degree)
            self.fused_history.append(FusedRecord(0.0, fused.mean, fused.std))
        _LOGGER.info("Running %d epochs for %d satellites in %s mode",
                     schedule.epochs, len(self.runtimes), schedule.mode)
        while self.epoch < schedule.epochs:
            fused = await self._async_run_epoch(self.epoch)
            self.epoch += 1
            t = self.epoch * schedule.orbit_interval
            for runtime in self.runtimes:
                runtime.record()
            self.fused_history.append(FusedRecord(t, fused.mean, fused.std))
            self._notify(EpochProgress(self.epoch, schedule.epochs, t, fused))
        return self.result()

    def result(self) -> ConstellationResult:
        return ConstellationResult(
            histories={runtime.sat_id: runtime.history for runtime in self.runtimes},
            fused=list(self.fused_history),
            degree=self.mission.navigation.orbit_degree,
        )


def build_runtimes(
    setups: Sequence[SatelliteSetup], mission: Mission, seed: int
) -> list[SatelliteRuntime]:
    """One runtime per satellite, each with its own independent random stream."""
    streams = np.random.SeedSequence(seed).spawn(len(setups))
    return [SatelliteRuntime(setup, mission, np.random.default_rng(stream)) for setup, stream in zip(setups, streams)]


def _mission_for_mode(mission: Mission, mode: str | None) -> Mission:
    if mode is None or mode == mission.schedule.mode:
        return mission
    return replace(mission, schedule=replace(mission.schedule, mode=mode))


def run_constellation(
    scenario: Scenario,
    *,
    mode: str | None = None,
    listener: Callable[[EpochProgress], None] | None = None,
    executor: Executor | None = None,
) -> ConstellationResult:
    """Run a scenario through the coordinator."""
    mission = _mission_for_mode(scenario.mission, mode)
    runtimes = build_runtimes(scenario.satellites, mission, scenario.seed)
    coordinator = ConstellationCoordinator(runtimes, mission, executor)
    if listener is not None:
        coordinator.add_listener(listener)
    return asyncio.run(coordinator.async_run())


def run_standalone(setup: SatelliteSetup, mission: Mission, seed: int) -> ConstellationResult:
    """Single satellite, sequential, no event loop."""
    (runtime,) = build_runtimes([setup], mission, seed)
    degree = mission.navigation.orbit_degree
    runtime.record()
    fused = _initial_fused([runtime], degree)
    fused_history = [FusedRecord(0.0, fused.mean, fused.std)]
    for epoch in range(mission.schedule.epochs):
        runtime.run_epoch(epoch)
        fused = _fuse_runtimes([runtime], degree)
        runtime.record()
        fused_history.append(FusedRecord((epoch + 1) * mission.schedule.orbit_interval, fused.mean, fused.std))
    return ConstellationResult({runtime.sat_id: runtime.history}, fused_history, degree)

