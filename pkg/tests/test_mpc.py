"""Test linearization, transition matrices, condensing and MPC plans."""
import numpy as np
import pytest
from scipy.linalg import expm

from asteroid_gnc.guidance import ReferenceTrajectory, orbit_reference
from asteroid_gnc.mpc import (
    LtvBlocks,
    MpcConfig,
    assemble_qp,
    build_stacks,
    fd_jacobians,
    integrate_stm,
    linearize,
    mpc_step_attitude,
    mpc_step_orbit,
    tabulate_drift,
    tabulate_jacobians,
)

A_TARGET = 34e3


def _oscillator(t: float) -> tuple[np.ndarray, np.ndarray]:
    """Time-varying spring with a force input."""
    return np.array([[0.0, 1.0], [-1.0 - 0.1 * t, 0.0]]), np.array([[0.0], [1.0]])


def _random_blocks(rng, intervals=4, n=3, m=2) -> LtvBlocks:
    return LtvBlocks(
        np.eye(n) + 0.1 * rng.standard_normal((intervals, n, n)),
        rng.standard_normal((intervals, n, m)),
        rng.standard_normal((intervals, n)),
    )


def test_config_validation():
    """Test invalid controller settings are rejected."""
    with pytest.raises(ValueError, match="at least one interval"):
        MpcConfig(intervals=0, dt=1.0)
    with pytest.raises(ValueError, match="positive"):
        MpcConfig(intervals=2, dt=-1.0)
    with pytest.raises(ValueError, match="gamma"):
        MpcConfig(intervals=2, dt=1.0, gamma=0.0)
    with pytest.raises(ValueError, match="bounds"):
        MpcConfig(intervals=2, dt=1.0, u_max=0.0)
    with pytest.raises(ValueError, match="node"):
        MpcConfig(intervals=2, dt=1.0, stm_nodes=0)


def test_config_presets():
    """Test the orbit and attitude defaults."""
    orbit = MpcConfig.orbit(A_TARGET)
    assert orbit.intervals == 40
    assert orbit.horizon == pytest.approx(14400.0)
    assert orbit.state_scale[0] == A_TARGET
    attitude = MpcConfig.attitude(intervals=5)
    assert attitude.dt == pytest.approx(72.0)
    np.testing.assert_array_equal(attitude.u_max, np.full(3, 0.01))


def test_fd_jacobians_of_linear_dynamics(rng):
    """Test central differences recover A and B exactly for linear dynamics."""
    a = rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 2))

    def dynamics(x, u, t):
        return x @ a.T + u @ b.T

    jac_a, jac_b = fd_jacobians(dynamics, rng.standard_normal(4), np.zeros(2), 0.0, np.full(4, 1e-6), np.full(2, 1e-3))
    np.testing.assert_allclose(jac_a, a, atol=1e-8)
    np.testing.assert_allclose(jac_b, b, atol=1e-8)
    batched_a, _ = fd_jacobians(dynamics, rng.standard_normal((3, 4)), np.zeros(2), np.zeros(3), np.full(4, 1e-6), np.full(2, 1e-3))
    assert batched_a.shape == (3, 4, 4)


def test_linearize_scales_jacobians(rng):
    """Test A and B along a reference are expressed in scaled coordinates."""
    a = rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 2))
    scale = np.array([10.0, 1.0, 0.1])
    reference = ReferenceTrajectory(
        np.array([0.0, 1.0]),
        np.zeros((2, 3)),
        np.zeros((1, 2)),
        lambda t: np.ones(np.shape(t) + (3,)),
        lambda t: np.zeros(np.shape(t) + (2,)),
    )
    jacobians = linearize(lambda x, u, t: x @ a.T + u @ b.T, reference, np.full(3, 1e-6), np.full(2, 1e-3), scale)
    jac_a, jac_b = jacobians(0.5)
    np.testing.assert_allclose(jac_a, a * scale[None, :] / scale[:, None], rtol=1e-7, atol=1e-8)
    np.testing.assert_allclose(jac_b, b / scale[:, None], rtol=1e-7, atol=1e-8)


def test_fd_jacobians_reject_non_finite():
    """Test a non-finite dynamics evaluation is rejected."""
    with pytest.raises(ValueError, match="Non-finite"):
        fd_jacobians(lambda x, u, t: np.full(x.shape, np.nan), np.zeros(2), np.zeros(1), 0.0, np.full(2, 1e-6), [1e-3])


def test_stm_constant_system_matches_matrix_exponential(rng):
    """Test Φ = exp(A dt) and Γ = ∫exp(Aτ)B dτ for constant A, B."""
    a = 0.3 * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 1))
    blocks = integrate_stm(lambda t: (a, b), [0.0, 2.0])
    np.testing.assert_allclose(blocks.phis[0], expm(2.0 * a), rtol=1e-8, atol=1e-10)
    augmented = np.zeros((4, 4))
    augmented[:3, :3], augmented[:3, 3:] = a, b
    np.testing.assert_allclose(blocks.gammas[0], expm(2.0 * augmented)[:3, 3:], rtol=1e-8, atol=1e-10)
    np.testing.assert_array_equal(blocks.drifts[0], np.zeros(3))


def test_stm_semigroup():
    """Test Φ(t2, t0) = Φ(t2, t1)Φ(t1, t0) and the matching input composition."""
    split = integrate_stm(_oscillator, [0.0, 1.0, 2.0])
    whole = integrate_stm(_oscillator, [0.0, 2.0])
    np.testing.assert_allclose(whole.phis[0], split.phis[1] @ split.phis[0], atol=1e-9)
    np.testing.assert_allclose(whole.gammas[0], split.phis[1] @ split.gammas[0] + split.gammas[1], atol=1e-9)


def test_stm_drift_accumulates():
    """Test a constant drift with no dynamics integrates linearly."""
    blocks = integrate_stm(lambda t: (np.zeros((2, 2)), np.zeros((2, 1))), [0.0, 3.0], drift=lambda t: np.array([1.0, -2.0]))
    np.testing.assert_allclose(blocks.drifts[0], [3.0, -6.0], rtol=1e-12)


def test_build_stacks(rng):
    """Test the condensed matrices against the recursive prediction."""
    blocks = _random_blocks(rng)
    stacks = build_stacks(blocks)
    dx0 = rng.standard_normal(3)
    du = rng.standard_normal((4, 2))
    x = dx0
    for k in range(4):
        x = blocks.phis[k] @ x + blocks.gammas[k] @ du[k] + blocks.drifts[k]
        np.testing.assert_allclose((stacks.d @ dx0 + stacks.g @ du.ravel() + stacks.dx_bar)[3 * k : 3 * k + 3], x, atol=1e-12)
    assert np.all(stacks.g[:3, 2:] == 0.0)
    with pytest.raises(ValueError, match="Inconsistent"):
        build_stacks(LtvBlocks(blocks.phis[:3], blocks.gammas, blocks.drifts))


def test_assemble_qp(rng):
    """Test the Hessian, linear term and control bounds."""
    stacks = build_stacks(_random_blocks(rng, intervals=2, n=3, m=3))
    p_x = np.diag([1.0, 1.0, 0.0])
    u_ref = 0.001 * np.ones((2, 3))
    dx0 = rng.standard_normal(3)
    qp = assemble_qp(stacks, dx0, 10.0, p_x, u_ref, 0.01)
    p_s = np.kron(np.eye(2), p_x)
    np.testing.assert_allclose(qp.problem.h, 10.0 * stacks.g.T @ p_s @ stacks.g + np.eye(6))
    np.testing.assert_allclose(qp.problem.c, 10.0 * stacks.g.T @ p_s @ (stacks.d @ dx0 + stacks.dx_bar))
    np.testing.assert_allclose(qp.problem.lb, np.full(6, -0.011))
    np.testing.assert_allclose(qp.problem.ub, np.full(6, 0.009))
    assert not qp.pinned.any()


def test_assemble_qp_nullifies_normal_controls(rng):
    """Test pinned normal controls cancel the reference normal control."""
    stacks = build_stacks(_random_blocks(rng, intervals=2, n=3, m=3))
    u_ref = np.array([[0.0, 0.0, 0.002], [0.0, 0.0, -0.001]])
    qp = assemble_qp(stacks, np.zeros(3), 1.0, np.eye(3), u_ref, 0.01, nullify=True)
    assert qp.problem.size == 4
    full = qp.expand(np.ones(4))
    np.testing.assert_allclose(full.reshape(2, 3)[:, 2] + u_ref[:, 2], 0.0)
    np.testing.assert_array_equal(full.reshape(2, 3)[:, :2], np.ones((2, 2)))


def test_orbit_plan_on_reference_commands_reference_control(point_mass_asteroid, polar_orbit):
    """Test a satellite exactly on the reference needs no correction."""
    cfg = MpcConfig.orbit(A_TARGET, intervals=4, dt=900.0)
    plan = mpc_step_orbit(polar_orbit, point_mass_asteroid.gravity, A_TARGET, 0.0, point_mass_asteroid, cfg)
    np.testing.assert_allclose(plan.commands, np.zeros((4, 3)), atol=1e-12)
    assert plan.predicted.shape == (4, 6)
    assert plan.times.size == 5


@pytest.mark.slow
def test_orbit_plan_corrects_radius_error(asteroid, polar_orbit):
    """Test a high orbit gets a retrograde tangential command within bounds."""
    cfg = MpcConfig.orbit(A_TARGET, intervals=8, dt=900.0)
    estimate = polar_orbit.copy()
    estimate[0] += 200.0
    plan = mpc_step_orbit(estimate, asteroid.gravity, A_TARGET, 0.0, asteroid, cfg)
    assert plan.first_command[1] < 0.0
    assert np.all(np.abs(plan.commands) <= cfg.u_max + 1e-15)
    residuals = plan.solution.kkt
    assert residuals.primal <= 1e-12
    assert residuals.stationarity <= 1e-6


@pytest.mark.slow
def test_orbit_plan_without_normal_thrust(asteroid, polar_orbit):
    """Test nullified plans never command normal acceleration."""
    cfg = MpcConfig.orbit(A_TARGET, intervals=4, dt=900.0, nullify_out_of_plane=True)
    estimate = polar_orbit.copy()
    estimate[3] += 1e-4
    plan = mpc_step_orbit(estimate, asteroid.gravity, A_TARGET, 0.0, asteroid, cfg)
    np.testing.assert_allclose(plan.commands[:, 2], 0.0, atol=1e-18)
    assert plan.vars_per_interval == 2
    assert plan.shifted_warm_start().size == plan.solution.x.size


def test_plan_command_lookup(point_mass_asteroid, polar_orbit):
    """Test interval lookup and warm-start shifting."""
    cfg = MpcConfig.orbit(A_TARGET, intervals=4, dt=900.0)
    plan = mpc_step_orbit(polar_orbit, point_mass_asteroid.gravity, A_TARGET, 100.0, point_mass_asteroid, cfg)
    np.testing.assert_array_equal(plan.command_at(100.0), plan.commands[0])
    np.testing.assert_array_equal(plan.command_at(1050.0), plan.commands[1])
    np.testing.assert_array_equal(plan.command_at(1e6), plan.commands[-1])
    np.testing.assert_array_equal(plan.command_at(0.0), plan.commands[0])
    shifted = plan.shifted_warm_start(2)
    np.testing.assert_array_equal(shifted[:6], plan.solution.x[6:])
    assert plan.shifted_warm_start(10).size == 12


def test_attitude_plan_drives_error_back(asteroid, spacecraft, polar_orbit):
    """Test a roll error produces an opposing torque within bounds."""
    orbit_ref = orbit_reference(polar_orbit, asteroid.gravity, A_TARGET, 3600.0, 10, asteroid)
    cfg = MpcConfig.attitude(intervals=4, dt=9.0)
    n = np.sqrt(asteroid.mu / A_TARGET**3)
    plan = mpc_step_attitude(
        np.array([0.01, 0.0, 0.0]), [0.0, 0.0, n], orbit_ref, asteroid.gravity, np.zeros(3), 0.0, spacecraft, asteroid, cfg
    )
    assert plan.first_command[0] < 0.0
    assert np.all(np.abs(plan.commands) <= cfg.u_max + 1e-15)
    assert plan.reference.times[-1] == pytest.approx(36.0)


def test_reference_trajectory_round_trip_through_plan(point_mass_asteroid, polar_orbit):
    """Test the plan carries the reference it tracked."""
    cfg = MpcConfig.orbit(A_TARGET, intervals=2, dt=600.0)
    plan = mpc_step_orbit(polar_orbit, point_mass_asteroid.gravity, A_TARGET, 0.0, point_mass_asteroid, cfg)
    assert isinstance(plan.reference, ReferenceTrajectory)
    np.testing.assert_allclose(plan.predicted, plan.reference.states[1:], atol=1e-9)


def _oscillator_dynamics(calls: list[int]):
    def dynamics(x, u, t):
        assert x.ndim == 2
        calls.append(x.shape[0])
        return np.stack([x[:, 1], -(1.0 + 0.1 * t) * x[:, 0] + u[:, 0]], axis=-1)

    return dynamics


def _unit_reference(times) -> ReferenceTrajectory:
    times = np.asarray(times, dtype=float)
    return ReferenceTrajectory(
        times,
        np.ones((times.size, 2)),
        np.zeros((times.size - 1, 1)),
        lambda t: np.ones(np.shape(t) + (2,)),
        lambda t: np.zeros(np.shape(t) + (1,)),
    )


def test_fd_jacobians_flatten_leading_axes(rng):
    """Test several leading axes reach the dynamics as one flat batch."""
    calls = []
    a, b = fd_jacobians(
        _oscillator_dynamics(calls), rng.standard_normal((2, 3, 2)), np.zeros(1), np.full((2, 3), 1.0), np.full(2, 1e-6), [1e-3]
    )
    assert calls == [2 * 3 * 2 * (2 + 1)]
    assert a.shape == (2, 3, 2, 2)
    np.testing.assert_allclose(a[1, 2], _oscillator(1.0)[0], atol=1e-8)
    np.testing.assert_allclose(b[0, 0], _oscillator(1.0)[1], atol=1e-8)


def test_tabulated_jacobians_evaluate_dynamics_once():
    """Test tabulation linearizes all nodes in one batch and interpolates between them."""
    calls = []
    reference = _unit_reference([0.0, 1.0, 2.0])
    direct = linearize(_oscillator_dynamics(calls), reference, np.full(2, 1e-6), [1e-3])
    tabulated = tabulate_jacobians(direct, reference.times, 4)
    assert calls == [(2 * 4 + 1) * 2 * (2 + 1)]
    for t in (0.0, 0.37, 1.0, 1.5, 2.0):
        jac_a, jac_b = tabulated(t)
        np.testing.assert_allclose(jac_a, _oscillator(t)[0], atol=1e-8)
        np.testing.assert_allclose(jac_b, _oscillator(t)[1], atol=1e-8)
    assert len(calls) == 1


def test_tabulated_stm_matches_direct_integration():
    """Test transition blocks from tabulated Jacobians agree with the exact evaluator."""
    reference = _unit_reference([0.0, 1.0, 2.0])
    direct = linearize(_oscillator_dynamics([]), reference, np.full(2, 1e-6), [1e-3])
    exact = integrate_stm(_oscillator, reference.times)
    tabulated = integrate_stm(tabulate_jacobians(direct, reference.times), reference.times)
    np.testing.assert_allclose(tabulated.phis, exact.phis, atol=1e-7)
    np.testing.assert_allclose(tabulated.gammas, exact.gammas, atol=1e-7)


def test_tabulated_drift_interpolates_nodes():
    """Test the drift spline passes through the nodes and stays close between them."""

    def drift(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.sin(t), np.cos(t)], axis=-1)

    spline = tabulate_drift(drift, [0.0, 1.0, 2.0], 8)
    np.testing.assert_allclose(spline(0.25), drift(0.25), atol=1e-12)
    np.testing.assert_allclose(spline(1.3), drift(1.3), atol=1e-4)
    blocks = integrate_stm(lambda t: (np.zeros((2, 2)), np.zeros((2, 1))), [0.0, 2.0], drift=spline)
    np.testing.assert_allclose(blocks.drifts[0], [1.0 - np.cos(2.0), np.sin(2.0)], atol=1e-5)
