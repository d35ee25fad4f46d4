"""Test landmark selection, camera projection and sensor outputs."""
import logging

import numpy as np
import pytest

from asteroid_gnc.dynamics import TruthState
from asteroid_gnc.sensors import (
    CameraModel,
    Landmark,
    LandmarkCatalog,
    SensorSuite,
    attitude_measurement_fn,
    camera_project,
    orbit_measurement_fn,
    select_landmarks,
    simulate_attitude_measurement,
    simulate_orbit_measurement,
)

# Rotation by 180 deg about z; turns the -x boresight away from the asteroid.
FACING_AWAY = np.array([0.0, 0.0, 1.0])


@pytest.fixture
def small_catalog() -> LandmarkCatalog:
    """Return a hand-placed catalog seen from +x."""
    return LandmarkCatalog(
        ("tip", "side", "far", "limb", "edge"),
        [
            [17e3, 0.0, 0.0],
            [16e3, 2e3, 0.0],
            [-17e3, 0.0, 0.0],
            [0.0, 5.5e3, 0.0],
            [10e3, 8e3, 0.0],
        ],
    )


def test_catalog_validation():
    """Test malformed catalogs are rejected."""
    with pytest.raises(ValueError, match="unique"):
        LandmarkCatalog(("a", "a"), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="one 3-vector"):
        LandmarkCatalog(("a", "b"), [[1.0, 0.0, 0.0]])
    with pytest.raises(ValueError, match="nonzero"):
        LandmarkCatalog(("a",), [[0.0, 0.0, 0.0]])


def test_catalog_lookup(small_catalog):
    """Test positions come back in the requested order."""
    np.testing.assert_array_equal(small_catalog.positions_of(["far", "tip"]), [[-17e3, 0.0, 0.0], [17e3, 0.0, 0.0]])
    assert small_catalog["side"].id == "side"
    assert len(small_catalog) == 5


def test_pixel_width():
    """Test the pixel pitch follows the field of view."""
    camera = CameraModel()
    assert camera.pixel_width == pytest.approx(2.0 * 0.3 * np.tan(np.deg2rad(15.0)) / 2048)


def test_select_nadir_landmarks(small_catalog, asteroid, polar_orbit):
    """Test only near-side landmarks inside the field of view are chosen, closest to boresight first."""
    camera = CameraModel()
    chosen = select_landmarks(small_catalog, polar_orbit, np.zeros(3), camera, 5, 0.0, asteroid)
    assert chosen == ["tip", "side"]
    assert select_landmarks(small_catalog, polar_orbit, np.zeros(3), camera, 1, 0.0, asteroid) == ["tip"]


def test_select_nothing_when_facing_away(small_catalog, asteroid, polar_orbit):
    """Test an empty selection when the camera looks away from the body."""
    assert select_landmarks(small_catalog, polar_orbit, FACING_AWAY, CameraModel(), 3, 0.0, asteroid) == []


def test_select_respects_tracking_limit(catalog, asteroid, polar_orbit):
    """Test the synthetic catalog never yields more than the tracking limit."""
    chosen = select_landmarks(catalog, polar_orbit, np.zeros(3), CameraModel(), 3, 0.0, asteroid)
    assert 1 <= len(chosen) <= 3
    assert len(set(chosen)) == len(chosen)


def test_project_boresight_landmark(small_catalog, asteroid, polar_orbit):
    """Test a landmark on the boresight lands on the principal point."""
    pixel, rng = camera_project(small_catalog["tip"], polar_orbit, np.zeros(3), CameraModel(), 0.0, asteroid)
    assert pixel == (0, 0)
    assert rng == pytest.approx(17e3)


def test_project_off_axis_landmark(small_catalog, asteroid, polar_orbit):
    """Test pinhole scaling of an off-axis landmark."""
    camera = CameraModel()
    pixel, rng = camera_project(small_catalog["side"], polar_orbit, np.zeros(3), camera, 0.0, asteroid)
    assert pixel == (0, int(np.floor(2e3 * camera.focal_length / (18e3 * camera.pixel_width))))
    assert rng == pytest.approx(np.hypot(18e3, 2e3))


def test_project_behind_camera_raises(asteroid, polar_orbit):
    """Test projection of a landmark behind the image plane."""
    with pytest.raises(ValueError, match="behind the image plane"):
        camera_project(Landmark("a", np.array([17e3, 0.0, 0.0])), polar_orbit, FACING_AWAY, CameraModel(), 0.0, asteroid)


def test_measurement_function_matches_projection(small_catalog, asteroid, polar_orbit):
    """Test the filter measurement function agrees with the quantized projection."""
    camera = CameraModel()
    ids = ["tip", "side"]
    z = orbit_measurement_fn(polar_orbit, np.zeros(3), small_catalog.positions_of(ids), camera, 0.0, asteroid)
    assert z.shape == (6,)
    for n, lid in enumerate(ids):
        pixel, rng = camera_project(small_catalog[lid], polar_orbit, np.zeros(3), camera, 0.0, asteroid)
        assert tuple(np.floor(z[3 * n : 3 * n + 2]).astype(int)) == pixel
        assert z[3 * n + 2] == pytest.approx(rng)


def test_measurement_function_batches_rows(small_catalog, asteroid, polar_orbit):
    """Test one measurement row per state row."""
    rows = np.tile(polar_orbit, (4, 1))
    rows[:, 5] += np.linspace(0.0, 0.01, 4)
    positions = small_catalog.positions_of(["tip", "side"])
    z = orbit_measurement_fn(rows, np.zeros(3), positions, CameraModel(), 0.0, asteroid)
    assert z.shape == (4, 6)
    np.testing.assert_allclose(z[2], orbit_measurement_fn(rows[2], np.zeros(3), positions, CameraModel(), 0.0, asteroid))


def test_measurement_function_clamps_behind(asteroid, polar_orbit, caplog):
    """Test predictions behind the camera stay finite and are logged."""
    with caplog.at_level(logging.WARNING):
        z = orbit_measurement_fn(polar_orbit, FACING_AWAY, np.array([[17e3, 0.0, 0.0]]), CameraModel(), 0.0, asteroid)
    assert np.all(np.isfinite(z))
    assert "Clamped" in caplog.text


def test_attitude_measurement_function():
    """Test the star tracker reads σ and the gyro reads ω plus bias."""
    y = np.concatenate([[0.1, 0.2, 0.3], [1e-3, 2e-3, 3e-3], np.zeros(5), [1e-5, -1e-5, 2e-5]])
    np.testing.assert_allclose(attitude_measurement_fn(y), [0.1, 0.2, 0.3, 1.01e-3, 1.99e-3, 3.02e-3])
    assert attitude_measurement_fn(np.tile(y, (3, 1))).shape == (3, 6)


def test_noise_free_orbit_measurement(small_catalog, asteroid, polar_orbit, rng):
    """Test a noise-free suite returns the floored pixels and exact ranges."""
    suite = SensorSuite(pixel_sigma=0.0, lidar_sigma=0.0)
    truth = TruthState(x_orb=polar_orbit, sigma_bi=np.zeros(3), omega=np.zeros(3))
    z = simulate_orbit_measurement(truth, ["tip", "side"], small_catalog, suite, asteroid, rng)
    exact = orbit_measurement_fn(polar_orbit, np.zeros(3), small_catalog.positions_of(["tip", "side"]), suite.camera, 0.0, asteroid)
    np.testing.assert_array_equal(z[[0, 1, 3, 4]], np.floor(exact[[0, 1, 3, 4]]))
    np.testing.assert_allclose(z[[2, 5]], exact[[2, 5]])
    with pytest.raises(ValueError, match="At least one landmark"):
        simulate_orbit_measurement(truth, [], small_catalog, suite, asteroid, rng)


def test_noise_free_attitude_measurement(polar_orbit, rng):
    """Test a noise-free star tracker and gyro return the truth plus bias."""
    suite = SensorSuite(star_tracker_sigma=0.0, gyro_sigma=0.0)
    truth = TruthState(x_orb=polar_orbit, sigma_bi=np.array([0.1, -0.2, 0.05]), omega=np.array([1e-3, 0.0, -2e-3]))
    z = simulate_attitude_measurement(truth, suite, rng)
    np.testing.assert_allclose(z[:3], truth.sigma_bi, atol=1e-15)
    np.testing.assert_allclose(z[3:], truth.omega + suite.gyro_bias)


def test_star_tracker_noise_level(polar_orbit):
    """Test the star-tracker error angle has the configured spread."""
    suite = SensorSuite()
    truth = TruthState(x_orb=polar_orbit, sigma_bi=np.zeros(3), omega=np.zeros(3))
    generator = np.random.default_rng(1)
    angles = [4.0 * np.arctan(np.linalg.norm(simulate_attitude_measurement(truth, suite, generator)[:3])) for _ in range(4000)]
    assert np.sqrt(np.mean(np.square(angles))) == pytest.approx(suite.star_tracker_sigma, rel=0.05)


def test_suite_rejects_negative_noise():
    """Test negative noise levels are rejected."""
    with pytest.raises(ValueError, match="lidar_sigma"):
        SensorSuite(lidar_sigma=-1.0)
