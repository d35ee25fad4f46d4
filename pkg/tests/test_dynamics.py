"""Test truth and process propagation."""
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from asteroid_gnc.dynamics import (
    ActuatorProfile,
    IntegratorSettings,
    SpacecraftConfig,
    TruthState,
    attitude_process_flow,
    attitude_rates,
    attitude_state_dim,
    gve_rates,
    integrate,
    orbit_process_flow,
    orbit_state_dim,
    propagate_truth,
)
from asteroid_gnc.elements import (
    ClassicalElements,
    cartesian_to_mee,
    classical_to_mee,
    mee_to_cartesian,
    orbit_frame_angular_velocity,
    rot_orbit_from_inertial,
)
from asteroid_gnc.exceptions import IntegrationError
from asteroid_gnc.gravity import AsteroidModel, GravityModel, MassDistribution

MU = 4.4628e5


def _period(a: float) -> float:
    return 2.0 * np.pi * np.sqrt(a**3 / MU)


def test_actuator_profile_first_order_response():
    """Test the applied value relaxes from the start value toward the command."""
    profile = ActuatorProfile(command=np.array([1.0, 0.0, 0.0]), start=np.zeros(3), t_switch=10.0, rate=0.1)
    np.testing.assert_allclose(profile.value(10.0), np.zeros(3))
    np.testing.assert_allclose(profile.value(5.0), np.zeros(3))
    np.testing.assert_allclose(profile.value(20.0), [1.0 - np.exp(-1.0), 0.0, 0.0])
    assert profile.value(np.array([10.0, 20.0])).shape == (2, 3)


def test_actuator_switch_is_continuous():
    """Test a new command starts from the value actually applied at the switch."""
    first = ActuatorProfile(rate=0.1).commanded([1.0, 2.0, 3.0], 0.0)
    second = first.commanded([0.0, 0.0, 0.0], 5.0)
    np.testing.assert_allclose(second.value(5.0), first.value(5.0))
    assert second.t_switch == 5.0
    assert second.commanded([0.0, 0.0, 0.0], 9.0) is second


def test_spacecraft_inertia_from_masses(masses):
    """Test the inertia derived from the point masses."""
    cfg = SpacecraftConfig.from_masses(masses)
    np.testing.assert_allclose(np.diag(cfg.inertia), [2000.0, 16400.0, 17600.0])
    np.testing.assert_allclose(cfg.inertia @ cfg.inertia_inv, np.eye(3), atol=1e-12)


def test_spacecraft_rejects_inconsistent_inertia(masses):
    """Test an inertia that does not match the masses is rejected."""
    with pytest.raises(ValueError, match="not consistent"):
        SpacecraftConfig(inertia=np.eye(3) * 1000.0, masses=masses)


def test_mass_distribution_center_of_mass():
    """Test point masses off the origin centre of mass are rejected."""
    with pytest.raises(ValueError, match="Center of mass"):
        MassDistribution(offsets=[[1.0, 0.0, 0.0]], masses=[1.0])


def test_gve_matches_velocity_impulse():
    """Test element rates against a small velocity change converted through Cartesian state."""
    x = classical_to_mee(ClassicalElements(a=36e3, e=0.15, i=0.8, raan=0.4, argp=1.1, nu=0.7))
    accel = np.array([2e-7, -5e-7, 3e-7])
    dt = 1.0
    pos, vel = mee_to_cartesian(x, MU)
    dv = rot_orbit_from_inertial(x).T @ accel * dt
    numeric = (cartesian_to_mee(pos, vel + dv, MU) - x) / dt
    analytic = gve_rates(x, accel, MU) - gve_rates(x, np.zeros(3), MU)
    np.testing.assert_allclose(numeric, analytic, rtol=1e-4, atol=1e-14)


def test_gve_keplerian_motion_only_advances_longitude(polar_orbit):
    """Test unperturbed rates leave every element but L fixed."""
    rates = gve_rates(polar_orbit, np.zeros(3), MU)
    np.testing.assert_array_equal(rates[:5], np.zeros(5))
    assert rates[5] == pytest.approx(np.sqrt(MU / 34e3**3))


def test_gve_rectilinear_degeneracy():
    """Test w <= 0 raises an integration error."""
    with pytest.raises(IntegrationError, match="Rectilinear"):
        gve_rates(np.array([30e3, -1.0, 0.0, 0.0, 0.0, 0.0]), np.zeros(3), MU)


def test_keplerian_orbit_over_one_period(point_mass_asteroid, spacecraft, no_sun, settings, polar_orbit):
    """Test a point-mass orbit keeps its elements and returns to the same longitude."""
    state = TruthState(x_orb=polar_orbit, sigma_bi=np.zeros(3), omega=np.zeros(3))
    period = _period(34e3)
    final = propagate_truth(state, np.zeros(3), np.zeros(3), period, spacecraft, point_mass_asteroid, no_sun, settings)
    np.testing.assert_allclose(final.x_orb[:5], polar_orbit[:5], rtol=1e-9, atol=1e-12)
    assert np.angle(np.exp(1j * (final.x_orb[5] - polar_orbit[5] - 2.0 * np.pi))) == pytest.approx(0.0, abs=1e-7)
    assert final.t == pytest.approx(period)


def test_zonal_node_drift_matches_secular_rate(spacecraft, no_sun, settings):
    """Test a C20-only field drifts the node at the first-order secular rate."""
    c20 = -0.01
    c = np.zeros((3, 3))
    c[2, 0] = c20
    gravity = GravityModel(mu=MU, radius=16e3, degree=2, c=c, s=np.zeros((3, 3)))
    asteroid = AsteroidModel(gravity=gravity, spin_rate=2.0 * np.pi / 18972.0)
    a, inc = 40e3, np.deg2rad(60.0)
    x0 = classical_to_mee(ClassicalElements(a=a, e=0.0, i=inc, raan=0.0, argp=0.0, nu=0.0))
    state = TruthState(x_orb=x0, sigma_bi=np.zeros(3), omega=np.zeros(3))
    period = _period(a)
    final = propagate_truth(state, np.zeros(3), np.zeros(3), period, spacecraft, asteroid, no_sun, settings)
    drift = np.arctan2(final.x_orb[4], final.x_orb[3]) - np.arctan2(x0[4], x0[3])
    j2 = -np.sqrt(5.0) * c20
    expected = -1.5 * np.sqrt(MU / a**3) * j2 * (16e3 / a) ** 2 * np.cos(inc) * period
    assert drift == pytest.approx(expected, rel=0.05)


def test_body_rotating_with_orbit_frame_has_no_relative_rate(point_mass_asteroid, spacecraft, polar_orbit):
    """Test σ_BO stays fixed for a body turning with the orbit frame."""
    omega = orbit_frame_angular_velocity(polar_orbit, 0.0, MU)
    sigma_dot, _ = attitude_rates(
        np.zeros(3), omega, np.zeros(3), polar_orbit, spacecraft,
        point_mass_asteroid.gravity, point_mass_asteroid, 0.0, relative_to_orbit=True,
    )
    np.testing.assert_allclose(sigma_dot, np.zeros(3), atol=1e-15)


def test_torque_free_euler_equations(point_mass_asteroid, spacecraft, polar_orbit):
    """Test ω̇ = J⁻¹(T − ω × Jω) with gravity gradient removed by alignment."""
    omega = np.array([1e-3, 2e-3, -1e-3])
    torque = np.array([1e-3, 0.0, 0.0])
    _, omega_dot = attitude_rates(
        np.zeros(3), omega, torque, np.array([1e12, 0.0, 0.0, 0.0, 0.0, 0.0]),
        spacecraft, point_mass_asteroid.gravity, point_mass_asteroid, 0.0,
    )
    expected = spacecraft.inertia_inv @ (torque - np.cross(omega, spacecraft.inertia @ omega))
    np.testing.assert_allclose(omega_dot, expected, rtol=1e-9)


def test_orbit_process_flow_batch_matches_rows(asteroid, settings, polar_orbit, rng):
    """Test a batch of extended states propagates like each row on its own."""
    dim = orbit_state_dim(4)
    batch = np.tile(np.concatenate([polar_orbit, asteroid.gravity.packed()]), (3, 1))
    batch[:, 6:] += 1e-3 * rng.standard_normal((3, dim - 6))
    accel = ActuatorProfile(command=np.array([1e-5, 0.0, 0.0]))
    out = orbit_process_flow(batch, 0.0, 36.0, accel, asteroid, 4, settings)
    for row, result in zip(batch, out):
        single = orbit_process_flow(row, 0.0, 36.0, accel, asteroid, 4, settings)
        np.testing.assert_allclose(result, single, rtol=1e-7, atol=1e-8)
    np.testing.assert_array_equal(out[:, 6:], batch[:, 6:])


def test_process_flow_dimension_checks(asteroid, spacecraft, settings, polar_orbit):
    """Test wrongly sized extended states are rejected."""
    with pytest.raises(ValueError, match="Orbit extended state"):
        orbit_process_flow(np.zeros(7), 0.0, 1.0, ActuatorProfile(), asteroid, 4, settings)
    with pytest.raises(ValueError, match="Attitude extended state"):
        attitude_process_flow(np.zeros(7), 0.0, 1.0, polar_orbit, ActuatorProfile(), spacecraft, asteroid, 2, settings)


def test_attitude_process_flow_keeps_parameters(asteroid, spacecraft, settings, polar_orbit):
    """Test gravity and bias entries pass through unchanged."""
    y0 = np.zeros(attitude_state_dim(2))
    y0[3:6] = orbit_frame_angular_velocity(polar_orbit, 0.0, MU)
    y0[6:11] = asteroid.gravity.packed(2)
    y0[11:] = 1e-5
    out = attitude_process_flow(y0, 0.0, 3.6, polar_orbit, ActuatorProfile(), spacecraft, asteroid, 2, settings)
    assert out.shape == y0.shape
    np.testing.assert_array_equal(out[6:], y0[6:])
    assert np.all(np.isfinite(out))


def test_integrate_rejects_non_positive_interval(settings):
    """Test a zero interval is rejected."""
    with pytest.raises(ValueError, match="positive"):
        integrate(lambda t, y: y, 0.0, np.ones(1), 0.0, settings, 1e-12)


def test_integrate_failure_raises(settings):
    """Test solver failure is surfaced as an integration error."""
    failed = MagicMock(success=False, message="step size too small")
    with patch("asteroid_gnc.dynamics.solve_ivp", return_value=failed):
        with pytest.raises(IntegrationError, match="step size too small"):
            integrate(lambda t, y: y, 0.0, np.ones(1), 1.0, settings, 1e-12)


def test_settings_orbit_tolerance():
    """Test p carries its own absolute tolerance."""
    atol = IntegratorSettings(atol_p=1e-6, atol=1e-12).orbit_atol()
    np.testing.assert_array_equal(atol, [1e-6] + [1e-12] * 5)


def test_integrate_caps_step_at_sensor_interval(settings):
    """Test the solver never steps past the attitude sensor interval."""
    assert IntegratorSettings().max_step == 3.6
    solved = MagicMock(success=True, y=np.ones((1, 2)))
    with patch("asteroid_gnc.dynamics.solve_ivp", return_value=solved) as solve_ivp:
        integrate(lambda t, y: -y, 0.0, np.ones(1), 36.0, settings, 1e-12)
    assert solve_ivp.call_args.kwargs["max_step"] == 3.6
