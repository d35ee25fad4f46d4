"""Linear time-varying MPC: linearization, STMs, condensing and the QP step."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline

from .const import (
    ATTITUDE_FD_FLOORS,
    DEFAULT_ACCEL_MAX,
    DEFAULT_ATTITUDE_HORIZON_S,
    DEFAULT_ATTITUDE_INTERVALS,
    DEFAULT_ORBIT_HORIZON_S,
    DEFAULT_ORBIT_INTERVALS,
    DEFAULT_QP_MAX_ITER,
    DEFAULT_QP_TOL,
    DEFAULT_TORQUE_MAX,
    DEFAULT_TRACKING_WEIGHT,
    FD_RELATIVE_STEP,
    MEE_FD_FLOORS,
)
from .dynamics import IntegratorSettings, SpacecraftConfig, attitude_rates, gve_rates, integrate
from .elements import Mee, Mrp
from .gravity import AsteroidModel, GravityModel, gravity_accel_orbit_frame
from .guidance import ReferenceTrajectory, attitude_reference, orbit_reference
from .qp import QpProblem, QpSolution, solve_box_qp

_LOGGER = logging.getLogger(__name__)

DynamicsFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
JacobianFn = Callable[[float], tuple[np.ndarray, np.ndarray]]

CONTROL_FD_FRACTION = 1.0e-3
STM_SETTINGS = IntegratorSettings(rtol=1.0e-9, atol=1.0e-12, max_step=np.inf)
STM_NODES_PER_INTERVAL = 4


def _selector() -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True, eq=False)
class MpcConfig:
    """Horizon, weights and bounds of one receding-horizon controller.

    ``state_scale`` divides the state before weighting, so ``p_x`` applies to
    scaled deviations. ``stm_nodes`` sets how many linearization points each
    interval gets before A, B and the drift are interpolated.
    """

    intervals: int
    dt: float
    gamma: float = DEFAULT_TRACKING_WEIGHT
    p_x: np.ndarray = field(default_factory=_selector)
    u_max: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_ACCEL_MAX))
    nullify_out_of_plane: bool = False
    state_scale: np.ndarray = field(default_factory=lambda: np.ones(6))
    fd_floors: np.ndarray = field(default_factory=lambda: np.array(MEE_FD_FLOORS))
    settings: IntegratorSettings = STM_SETTINGS
    stm_nodes: int = STM_NODES_PER_INTERVAL
    qp_tol: float = DEFAULT_QP_TOL
    qp_max_iter: int = DEFAULT_QP_MAX_ITER

    def __post_init__(self) -> None:
        if self.intervals < 1:
            raise ValueError("MPC needs at least one interval")
        if self.dt <= 0.0:
            raise ValueError("MPC interval must be positive")
        if self.gamma <= 0.0:
            raise ValueError("Tracking weight gamma must be positive")
        if self.stm_nodes < 1:
            raise ValueError("Linearization needs at least one node per interval")
        for name in ("p_x", "u_max", "state_scale", "fd_floors"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "u_max", np.broadcast_to(self.u_max, (3,)).copy())
        if np.any(self.u_max <= 0.0) or np.any(self.state_scale <= 0.0):
            raise ValueError("Control bounds and state scales must be positive")

    @property
    def horizon(self) -> float:
        return self.intervals * self.dt

    @classmethod
    def orbit(cls, a_target: float, **kwargs) -> MpcConfig:
        """Orbit controller with p measured in units of the target radius."""
        kwargs.setdefault("intervals", DEFAULT_ORBIT_INTERVALS)
        kwargs.setdefault("dt", DEFAULT_ORBIT_HORIZON_S / kwargs["intervals"])
        kwargs.setdefault("state_scale", np.array([a_target, 1.0, 1.0, 1.0, 1.0, 1.0]))
        return cls(**kwargs)

    @classmethod
    def attitude(cls, **kwargs) -> MpcConfig:
        kwargs.setdefault("intervals", DEFAULT_ATTITUDE_INTERVALS)
        kwargs.setdefault("dt", DEFAULT_ATTITUDE_HORIZON_S / kwargs["intervals"])
        kwargs.setdefault("u_max", np.full(3, DEFAULT_TORQUE_MAX))
        kwargs.setdefault("fd_floors", np.array(ATTITUDE_FD_FLOORS))
        return cls(**kwargs)


class LtvBlocks(NamedTuple):
    """Per-interval transition, input and drift blocks."""

    phis: np.ndarray
    gammas: np.ndarray
    drifts: np.ndarray


class StackedLtv(NamedTuple):
    """Δx_S = D Δx₀ + G Δu_S + Δx̄_S over the whole horizon."""

    d: np.ndarray
    g: np.ndarray
    dx_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class CondensedQp:
    """Box QP over the unpinned controls plus the pinned values."""

    problem: QpProblem
    pinned: np.ndarray
    pinned_values: np.ndarray

    def expand(self, x_free: npt.ArrayLike) -> np.ndarray:
        """Full control-deviation vector from the free variables."""
        full = self.pinned_values.copy()
        full[~self.pinned] = np.asarray(x_free, dtype=float)
        return full


@dataclass(frozen=True, eq=False)
class MpcPlan:
    """Commanded control sequence and the data behind it."""

    times: np.ndarray
    commands: np.ndarray
    reference: ReferenceTrajectory
    predicted: np.ndarray
    solution: QpSolution
    vars_per_interval: int

    @property
    def first_command(self) -> np.ndarray:
        return self.commands[0].copy()

    def command_at(self, t: float) -> np.ndarray:
        """Command of the interval containing t, holding the last one past the horizon."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.commands[int(np.clip(k, 0, len(self.commands) - 1))].copy()

    def shifted_warm_start(self, intervals: int = 1) -> np.ndarray:
        """Free QP variables shifted by whole intervals, tail repeated."""
        x = self.solution.x
        shift = intervals * self.vars_per_interval
        if shift >= x.size:
            return np.tile(x[-self.vars_per_interval:], x.size // self.vars_per_interval)
        return np.concatenate([x[shift:], np.tile(x[-self.vars_per_interval:], intervals)])


def fd_jacobians(
    dynamics: DynamicsFn,
    x: npt.ArrayLike,
    u: npt.ArrayLike,
    t: npt.ArrayLike,
    floors: npt.ArrayLike,
    u_steps: npt.ArrayLike,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference ∂f/∂x and ∂f/∂u at (x, u, t), batched over leading axes."""
    x = np.asarray(x, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), x.shape[:-1] + (np.size(u_steps),))
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    n, m = x.shape[-1], u.shape[-1]
    hx = np.maximum(FD_RELATIVE_STEP * np.abs(x), floors)
    hu = np.broadcast_to(np.asarray(u_steps, dtype=float), u.shape)

    dx = np.eye(n) * hx[..., None, :]
    du = np.eye(m) * hu[..., None, :]
    x_rep = np.repeat(x[..., None, :], 2 * m, axis=-2)
    u_rep = np.repeat(u[..., None, :], 2 * n, axis=-2)
    xs = np.concatenate([x[..., None, :] + dx, x[..., None, :] - dx, x_rep], axis=-2)
    us = np.concatenate([u_rep, u[..., None, :] + du, u[..., None, :] - du], axis=-2)
    ts = np.repeat(t[..., None], 2 * (n + m), axis=-1)
    f = np.asarray(dynamics(xs.reshape(-1, n), us.reshape(-1, m), ts.reshape(-1)), dtype=float)
    f = f.reshape(xs.shape)
    if not np.all(np.isfinite(f)):
        raise ValueError("Non-finite dynamics evaluation during linearization")

    a = (f[..., :n, :] - f[..., n:2 * n, :]) / (2.0 * hx[..., :, None])
    b = (f[..., 2 * n:2 * n + m, :] - f[..., 2 * n + m:, :]) / (2.0 * hu[..., :, None])
    return np.swapaxes(a, -1, -2), np.swapaxes(b, -1, -2)


def linearize(
    dynamics: DynamicsFn,
    reference: ReferenceTrajectory,
    floors: npt.ArrayLike,
    u_steps: npt.ArrayLike,
    scale: npt.ArrayLike | None = None,
) -> JacobianFn:
    """A(t), B(t) evaluator along the reference, in scaled state coordinates."""
    n = reference.states.shape[-1]
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)

    def jacobians(t: float) -> tuple[np.ndarray, np.ndarray]:
        a, b = fd_jacobians(dynamics, reference.state_fn(t), reference.control_fn(t), t, floors, u_steps)
        return a * scale[None, :] / scale[:, None], b / scale[:, None]

    return jacobians


def reference_drift(
    dynamics: DynamicsFn,
    reference: ReferenceTrajectory,
    scale: npt.ArrayLike | None = None,
    step: float | None = None,
) -> Callable[[float], np.ndarray]:
    """f(x̄, ū, t) − dx̄/dt along the reference, scaled."""
    n = reference.states.shape[-1]
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
    step = step if step is not None else 1.0e-3 * float(np.min(np.diff(reference.times)))

    def drift(t: float) -> np.ndarray:
        rate = (reference.state_fn(t + step) - reference.state_fn(t - step)) / (2.0 * step)
        model = dynamics(reference.state_fn(t), reference.control_fn(t), np.asarray(t, dtype=float))
        return (model - rate) / scale

    return drift


def _node_grid(times: np.ndarray, nodes_per_interval: int) -> np.ndarray:
    fractions = np.arange(nodes_per_interval) / nodes_per_interval
    inner = times[:-1, None] + np.diff(times)[:, None] * fractions
    return np.append(inner.ravel(), times[-1])


def tabulate_jacobians(
    jacobians: JacobianFn, times: npt.ArrayLike, nodes_per_interval: int = STM_NODES_PER_INTERVAL
) -> JacobianFn:
    """Evaluate A, B once on a sub-grid of every interval and interpolate between nodes.

    ``jacobians`` must accept an array of times.
    """
    grid = _node_grid(np.asarray(times, dtype=float), nodes_per_interval)
    a, b = jacobians(grid)
    a_spline, b_spline = CubicSpline(grid, a, axis=0), CubicSpline(grid, b, axis=0)

    def tabulated(t: float) -> tuple[np.ndarray, np.ndarray]:
        return a_spline(t), b_spline(t)

    return tabulated


def tabulate_drift(
    drift: Callable[[np.ndarray], np.ndarray],
    times: npt.ArrayLike,
    nodes_per_interval: int = STM_NODES_PER_INTERVAL,
) -> Callable[[float], np.ndarray]:
    """Same node grid as :func:`tabulate_jacobians` for the reference drift."""
    grid = _node_grid(np.asarray(times, dtype=float), nodes_per_interval)
    return CubicSpline(grid, drift(grid), axis=0)


def integrate_stm(
    jacobians: JacobianFn,
    times: npt.ArrayLike,
    drift: Callable[[float], np.ndarray] | None = None,
    settings: IntegratorSettings = STM_SETTINGS,
) -> LtvBlocks:
    """Per-interval Φ_k, Γ_k and accumulated drift from one augmented ODE per interval.

    Φ̇ = AΦ from I, Ψ̇ = AΨ + B from 0 and δ̇ = Aδ + d from 0, so that
    Ψ(t_k) = ∫Φ(t_k, τ)B(τ)dτ.
    """
    times = np.asarray(times, dtype=float)
    a0, b0 = jacobians(float(times[0]))
    n, m = b0.shape
    phis, gammas, drifts = [], [], []

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        a, b = jacobians(t)
        phi = y[:n * n].reshape(n, n)
        psi = y[n * n:n * n + n * m].reshape(n, m)
        delta = y[n * n + n * m:]
        d = drift(t) if drift is not None else np.zeros(n)
        return np.concatenate([(a @ phi).ravel(), (a @ psi + b).ravel(), a @ delta + d])

    y0 = np.concatenate([np.eye(n).ravel(), np.zeros(n * m), np.zeros(n)])
    for t0, t1 in zip(times[:-1], times[1:]):
        y1 = integrate(rhs, float(t0), y0, float(t1 - t0), settings, settings.atol)
        phis.append(y1[:n * n].reshape(n, n))
        gammas.append(y1[n * n:n * n + n * m].reshape(n, m))
        drifts.append(y1[n * n + n * m:])
    return LtvBlocks(np.array(phis), np.array(gammas), np.array(drifts))


def build_stacks(blocks: LtvBlocks) -> StackedLtv:
    """Condensed prediction matrices; block (k, i) of G is Φ(t_k, t_i)Γ_i."""
    intervals, n, m = blocks.gammas.shape
    if blocks.phis.shape != (intervals, n, n) or blocks.drifts.shape != (intervals, n):
        raise ValueError("Inconsistent LTV block dimensions")
    d = np.zeros((intervals * n, n))
    g = np.zeros((intervals * n, intervals * m))
    dx_bar = np.zeros(intervals * n)
    prev_d, prev_g, prev_bar = np.eye(n), np.zeros((n, intervals * m)), np.zeros(n)
    for k in range(intervals):
        rows = slice(k * n, (k + 1) * n)
        phi = blocks.phis[k]
        prev_d = phi @ prev_d
        prev_g = phi @ prev_g
        prev_g[:, k * m:(k + 1) * m] = blocks.gammas[k]
        prev_bar = phi @ prev_bar + blocks.drifts[k]
        d[rows], g[rows], dx_bar[rows] = prev_d, prev_g, prev_bar
    return StackedLtv(d, g, dx_bar)


def assemble_qp(
    stacks: StackedLtv,
    dx0: npt.ArrayLike,
    gamma: float,
    p_x: np.ndarray,
    u_ref: npt.ArrayLike,
    u_max: npt.ArrayLike,
    nullify: bool = False,
) -> CondensedQp:
    """H = γGᵀP_SG + I, c = γGᵀP_S(DΔx₀ + Δx̄_S), bounds on Δu around ū.

    With ``nullify`` every third (normal) control is pinned so the total
    normal command is zero, and eliminated from the problem.
    """
    n = stacks.d.shape[1]
    intervals = stacks.d.shape[0] // n
    size = stacks.g.shape[1]
    m = size // intervals
    p_s = np.kron(np.eye(intervals), p_x)
    weighted_g = p_s @ stacks.g
    h = gamma * stacks.g.T @ weighted_g + np.eye(size)
    c = gamma * weighted_g.T @ (stacks.d @ np.asarray(dx0, dtype=float) + stacks.dx_bar)
    u_ref = np.asarray(u_ref, dtype=float).ravel()
    u_bound = np.tile(np.broadcast_to(np.asarray(u_max, dtype=float), (m,)), intervals)
    lb, ub = -u_bound - u_ref, u_bound - u_ref

    pinned = np.zeros(size, dtype=bool)
    if nullify:
        pinned[m - 1::m] = True
    pinned_values = np.where(pinned, -u_ref, 0.0)
    free = ~pinned
    c_free = c[free] + h[np.ix_(free, pinned)] @ pinned_values[pinned]
    problem = QpProblem(h[np.ix_(free, free)], c_free, lb[free], ub[free])
    return CondensedQp(problem, pinned, pinned_values)


def orbit_model_dynamics(gravity: GravityModel, asteroid: AsteroidModel) -> DynamicsFn:
    """GVE under the estimated harmonics plus the control acceleration."""

    def dynamics(x: np.ndarray, u: np.ndarray, t: np.ndarray) -> np.ndarray:
        return gve_rates(x, gravity_accel_orbit_frame(gravity, x, t, asteroid) + u, gravity.mu)

    return dynamics


def attitude_model_dynamics(
    orbit_ref: ReferenceTrajectory, cfg: SpacecraftConfig, gravity: GravityModel, asteroid: AsteroidModel
) -> DynamicsFn:
    """[σ_BO, ω] rates along the orbit reference with the control torque."""

    def dynamics(x: np.ndarray, u: np.ndarray, t: np.ndarray) -> np.ndarray:
        t = np.broadcast_to(np.asarray(t, dtype=float), np.shape(x)[:-1])
        x_orb = orbit_ref.state_fn(t)
        sigma_dot, omega_dot = attitude_rates(
            x[..., :3], x[..., 3:], u, x_orb, cfg, gravity, asteroid, t, relative_to_orbit=True
        )
        return np.concatenate([sigma_dot, omega_dot], axis=-1)

    return dynamics


def _solve_plan(
    reference: ReferenceTrajectory,
    dynamics: DynamicsFn,
    dx0: np.ndarray,
    cfg: MpcConfig,
    with_drift: bool,
    warm_start: np.ndarray | None,
) -> MpcPlan:
    u_steps = CONTROL_FD_FRACTION * cfg.u_max
    jac = tabulate_jacobians(
        linearize(dynamics, reference, cfg.fd_floors, u_steps, cfg.state_scale), reference.times, cfg.stm_nodes
    )
    drift = None
    if with_drift:
        drift = tabulate_drift(reference_drift(dynamics, reference, cfg.state_scale), reference.times, cfg.stm_nodes)
    stacks = build_stacks(integrate_stm(jac, reference.times, drift, cfg.settings))
    qp = assemble_qp(
        stacks, dx0 / cfg.state_scale, cfg.gamma, cfg.p_x, reference.controls, cfg.u_max, cfg.nullify_out_of_plane
    )
    if warm_start is not None and np.size(warm_start) != qp.problem.size:
        warm_start = None
    solution = solve_box_qp(qp.problem, cfg.qp_tol, cfg.qp_max_iter, warm_start)
    delta = qp.expand(solution.x)
    commands = reference.controls + delta.reshape(reference.intervals, -1)
    predicted_scaled = stacks.d @ (dx0 / cfg.state_scale) + stacks.g @ delta + stacks.dx_bar
    predicted = reference.states[1:] + predicted_scaled.reshape(reference.intervals, -1) * cfg.state_scale
    _LOGGER.debug(
        "MPC plan: %d QP iterations, first command %s, max |Δu| %.3e",
        solution.iterations, commands[0], float(np.abs(delta).max(initial=0.0)),
    )
    vars_per_interval = qp.problem.size // reference.intervals
    return MpcPlan(reference.times, commands, reference, predicted, solution, vars_per_interval)


def mpc_step_orbit(
    estimate: Mee,
    gravity: GravityModel,
    a_target: float,
    t: float,
    asteroid: AsteroidModel,
    cfg: MpcConfig,
    warm_start: np.ndarray | None = None,
) -> MpcPlan:
    """Orbit tracking plan: acceleration commands ā_u + Δu per interval."""
    reference = orbit_reference(estimate, gravity, a_target, cfg.horizon, cfg.intervals, asteroid, t0=t)
    dx0 = np.asarray(estimate, dtype=float) - reference.states[0]
    return _solve_plan(reference, orbit_model_dynamics(gravity, asteroid), dx0, cfg, False, warm_start)


def mpc_step_attitude(
    sigma_bo: Mrp,
    omega: npt.ArrayLike,
    orbit_ref: ReferenceTrajectory,
    gravity: GravityModel,
    sigma_target: Mrp,
    t: float,
    spacecraft: SpacecraftConfig,
    asteroid: AsteroidModel,
    cfg: MpcConfig,
    warm_start: np.ndarray | None = None,
) -> MpcPlan:
    """Attitude tracking plan: torque commands with the reference drift compensated."""
    times = t + cfg.dt * np.arange(cfg.intervals + 1)
    reference = attitude_reference(orbit_ref, sigma_target, asteroid, times, gravity)
    dx0 = np.concatenate([np.asarray(sigma_bo, dtype=float), np.asarray(omega, dtype=float)]) - reference.states[0]
    dynamics = attitude_model_dynamics(orbit_ref, spacecraft, gravity, asteroid)
    return _solve_plan(reference, dynamics, dx0, cfg, True, warm_start)
