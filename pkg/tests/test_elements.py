"""Test the element and attitude algebra."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from asteroid_gnc.elements import (
    ClassicalElements,
    cartesian_to_mee,
    classical_to_mee,
    dcm_to_mrp,
    euler_angles_from_mrp,
    mee_to_cartesian,
    mee_to_classical,
    mee_to_spherical,
    mrp_compose,
    mrp_kinematics_matrix,
    mrp_shadow,
    mrp_switch,
    mrp_to_rotation,
    orbit_frame_angular_velocity,
    rot_orbit_from_inertial,
    rotation_from_euler,
)
from asteroid_gnc.exceptions import ConversionError

MU = 4.4628e5


def _random_mrps(rng, count, max_norm=0.9):
    directions = rng.standard_normal((count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * max_norm * rng.uniform(0.0, 1.0, (count, 1))


def test_circular_equatorial_orbit_elements():
    """Test a circular equatorial orbit maps to p = a and zero f, g, h, k."""
    x = classical_to_mee(ClassicalElements(a=34.0e3, e=0.0, i=0.0, raan=0.0, argp=0.0, nu=0.3))
    np.testing.assert_allclose(x, [34.0e3, 0.0, 0.0, 0.0, 0.0, 0.3], atol=1e-15)


def test_polar_orbit_has_unit_h():
    """Test a polar orbit with zero node has h = tan(45 deg) = 1."""
    x = classical_to_mee(ClassicalElements(a=34.0e3, e=0.0, i=np.pi / 2.0, raan=0.0, argp=0.0, nu=0.0))
    assert x[3] == pytest.approx(1.0)
    assert x[4] == pytest.approx(0.0, abs=1e-15)


def test_cartesian_round_trip(rng):
    """Test element sets survive the round trip through position and velocity."""
    for _ in range(50):
        oe = ClassicalElements(
            a=rng.uniform(20e3, 60e3),
            e=rng.uniform(0.0, 0.5),
            i=rng.uniform(0.0, 3.0),
            raan=rng.uniform(0.0, 2.0 * np.pi),
            argp=rng.uniform(0.0, 2.0 * np.pi),
            nu=rng.uniform(0.0, 2.0 * np.pi),
        )
        x = classical_to_mee(oe)
        pos, vel = mee_to_cartesian(x, MU)
        back = cartesian_to_mee(pos, vel, MU)
        np.testing.assert_allclose(back[:5], x[:5], rtol=1e-9, atol=1e-10)
        assert np.angle(np.exp(1j * (back[5] - x[5]))) == pytest.approx(0.0, abs=1e-10)


def test_mee_to_classical_inverts(rng):
    """Test classical elements are recovered from their equinoctial form."""
    oe = ClassicalElements(a=40e3, e=0.1, i=0.7, raan=1.2, argp=0.4, nu=2.0)
    back = mee_to_classical(classical_to_mee(oe))
    assert back.a == pytest.approx(oe.a)
    assert back.e == pytest.approx(oe.e)
    assert back.i == pytest.approx(oe.i)
    assert back.raan == pytest.approx(oe.raan)
    assert back.argp == pytest.approx(oe.argp)
    assert back.nu == pytest.approx(oe.nu)


def test_batched_conversion_matches_single(rng):
    """Test trailing-axis batches give the same result as single calls."""
    batch = np.stack(
        [classical_to_mee(ClassicalElements(30e3 + 1e3 * n, 0.01 * n, 0.2 * n, 0.1, 0.2, 0.3 * n)) for n in range(5)]
    )
    pos, vel = mee_to_cartesian(batch, MU)
    for n in range(5):
        single_pos, single_vel = mee_to_cartesian(batch[n], MU)
        np.testing.assert_allclose(pos[n], single_pos)
        np.testing.assert_allclose(vel[n], single_vel)


def test_invalid_elements_raise():
    """Test invalid inputs raise conversion errors."""
    with pytest.raises(ConversionError, match="Eccentricity"):
        ClassicalElements(a=30e3, e=1.2, i=0.0, raan=0.0, argp=0.0, nu=0.0)
    with pytest.raises(ConversionError, match="Retrograde"):
        ClassicalElements(a=30e3, e=0.0, i=np.pi, raan=0.0, argp=0.0, nu=0.0)
    with pytest.raises(ConversionError, match="Semi-latus"):
        mee_to_cartesian(np.array([-1.0, 0, 0, 0, 0, 0]), MU)
    with pytest.raises(ConversionError, match="angular momentum"):
        cartesian_to_mee([30e3, 0.0, 0.0], [1.0, 0.0, 0.0], MU)


def test_orbit_frame_rows(polar_orbit):
    """Test the orbit frame is orthonormal with the radial row along the position."""
    rot = rot_orbit_from_inertial(polar_orbit)
    np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-14)
    pos, vel = mee_to_cartesian(polar_orbit, MU)
    np.testing.assert_allclose(rot[0], pos / np.linalg.norm(pos), atol=1e-14)
    normal = np.cross(pos, vel)
    np.testing.assert_allclose(rot[2], normal / np.linalg.norm(normal), atol=1e-14)


def test_orbit_frame_rate_circular(polar_orbit):
    """Test a circular orbit frame turns at the mean motion about its normal."""
    omega = orbit_frame_angular_velocity(polar_orbit, 0.0, MU)
    np.testing.assert_allclose(omega, [0.0, 0.0, np.sqrt(MU / 34.0e3**3)], rtol=1e-14)


def test_mrp_rotation_matches_quaternions(rng):
    """Test MRP rotation matrices agree with a quaternion implementation."""
    sigmas = _random_mrps(rng, 10_000, max_norm=1.0)
    passive = mrp_to_rotation(sigmas)
    expected = np.swapaxes(Rotation.from_mrp(sigmas).as_matrix(), -1, -2)
    np.testing.assert_allclose(passive, expected, atol=1e-12)


def test_mrp_composition_matches_quaternions(rng):
    """Test MRP composition agrees with quaternion products on random cases."""
    first = _random_mrps(rng, 10_000)
    second = _random_mrps(rng, 10_000)
    for a, b in zip(first, second):
        composed = mrp_compose(a, b)
        expected = (Rotation.from_mrp(a) * Rotation.from_mrp(b)).as_matrix().T
        np.testing.assert_allclose(mrp_to_rotation(composed), expected, atol=1e-12)
        assert np.linalg.norm(composed) <= 1.0 + 1e-12


def test_mrp_compose_with_inverse_is_identity(rng):
    """Test composing with the negated set returns the identity."""
    sigma = _random_mrps(rng, 1)[0]
    np.testing.assert_allclose(mrp_compose(sigma, -sigma), np.zeros(3), atol=1e-15)


def test_shadow_set_same_attitude(rng):
    """Test the shadow set describes the same rotation."""
    sigma = _random_mrps(rng, 20)
    np.testing.assert_allclose(mrp_to_rotation(mrp_shadow(sigma)), mrp_to_rotation(sigma), atol=1e-12)
    with pytest.raises(ConversionError):
        mrp_shadow(np.zeros(3))


def test_switch_keeps_norm_at_most_one():
    """Test the switching rule keeps sets inside the unit sphere."""
    sigma = np.array([[2.0, 0.0, 0.0], [0.3, 0.0, 0.0]])
    switched = mrp_switch(sigma)
    np.testing.assert_allclose(switched, [[-0.5, 0.0, 0.0], [0.3, 0.0, 0.0]])


def test_dcm_to_mrp_round_trip(rng):
    """Test direction cosine matrices convert back to the short-rotation MRP."""
    sigmas = _random_mrps(rng, 100)
    np.testing.assert_allclose(dcm_to_mrp(mrp_to_rotation(sigmas)), sigmas, atol=1e-12)


def test_kinematics_matches_rotation_rate(rng):
    """Test σ̇ = ¼Cω reproduces the finite-difference rotation rate."""
    sigma = _random_mrps(rng, 1)[0]
    omega = np.array([1e-3, -2e-3, 5e-4])
    dt = 1e-4
    sigma_next = sigma + 0.25 * mrp_kinematics_matrix(sigma) @ omega * dt
    rot_dot = (mrp_to_rotation(sigma_next) - mrp_to_rotation(sigma)) / dt
    skew = -rot_dot @ mrp_to_rotation(sigma).T
    np.testing.assert_allclose([skew[2, 1], skew[0, 2], skew[1, 0]], omega, rtol=1e-3)


def test_euler_sequence_round_trip(rng):
    """Test pitch, roll and yaw rebuild the same rotation."""
    for sigma in _random_mrps(rng, 200, max_norm=0.5):
        pitch, roll, yaw = euler_angles_from_mrp(sigma)
        np.testing.assert_allclose(rotation_from_euler(pitch, roll, yaw), mrp_to_rotation(sigma), atol=1e-10)


def test_euler_gimbal_lock_raises():
    """Test the sequence reports gimbal lock at roll = 90 deg."""
    sigma = dcm_to_mrp(rotation_from_euler(0.0, np.pi / 2.0, 0.0))
    with pytest.raises(ConversionError, match="gimbal lock"):
        euler_angles_from_mrp(sigma)


def test_spherical_coordinates_follow_spin(polar_orbit):
    """Test longitude in the asteroid frame decreases as the body spins."""
    before = mee_to_spherical(polar_orbit, 0.0)
    after = mee_to_spherical(polar_orbit, 0.1)
    assert before.r == pytest.approx(34.0e3)
    assert np.angle(np.exp(1j * (after.lon - before.lon))) == pytest.approx(-0.1)
