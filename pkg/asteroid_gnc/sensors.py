"""Camera/LIDAR landmark measurements and star-tracker/gyro outputs."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from .const import (
    ARCSEC,
    DEFAULT_CAMERA_MOUNT,
    DEFAULT_FOCAL_LENGTH_M,
    DEFAULT_FOV_DEG,
    DEFAULT_GYRO_BIAS_DEG_H,
    DEFAULT_GYRO_SIGMA_DEG_H,
    DEFAULT_LIDAR_SIGMA_M,
    DEFAULT_PIXEL_SIGMA_PX,
    DEFAULT_RESOLUTION_PX,
    DEFAULT_STAR_TRACKER_SIGMA_ARCSEC,
    DEFAULT_TRACKED_LANDMARKS,
    DEG_PER_HOUR,
)
from .dynamics import ATTITUDE_DIM, TruthState
from .elements import Mee, Mrp, mee_position, mrp_compose, mrp_to_rotation, spin_rotation
from .gravity import AsteroidModel

_LOGGER = logging.getLogger(__name__)

FAR_FIELD_DEPTH_RATIO = 1.0e-3


class Landmark(NamedTuple):
    """Surface landmark in the asteroid frame."""

    id: str
    position: np.ndarray


@dataclass(frozen=True, eq=False)
class LandmarkCatalog:
    """Landmark identifiers and asteroid-frame positions."""

    ids: tuple[str, ...]
    positions: np.ndarray

    def __post_init__(self) -> None:
        positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        ids = tuple(str(i) for i in self.ids)
        if positions.shape != (len(ids), 3):
            raise ValueError("Landmark catalog needs one 3-vector per id")
        if len(set(ids)) != len(ids):
            raise ValueError("Landmark ids must be unique")
        if np.any(np.linalg.norm(positions, axis=1) == 0.0):
            raise ValueError("Landmark positions must be nonzero")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "_index", {lid: n for n, lid in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, lid: str) -> Landmark:
        return Landmark(lid, self.positions[self._index[lid]])

    def positions_of(self, ids: Sequence[str]) -> np.ndarray:
        """Positions of the given ids, in the given order."""
        return self.positions[[self._index[lid] for lid in ids]].reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera rigidly mounted on the body."""

    focal_length: float = DEFAULT_FOCAL_LENGTH_M
    resolution: int = DEFAULT_RESOLUTION_PX
    fov: float = np.deg2rad(DEFAULT_FOV_DEG)
    mount: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_CAMERA_MOUNT))

    @property
    def pixel_width(self) -> float:
        return 2.0 * self.focal_length * np.tan(self.fov / 2.0) / self.resolution


@dataclass(frozen=True, eq=False)
class SensorSuite:
    """Navigation sensors datasheet."""

    camera: CameraModel = field(default_factory=CameraModel)
    pixel_sigma: float = DEFAULT_PIXEL_SIGMA_PX
    lidar_sigma: float = DEFAULT_LIDAR_SIGMA_M
    star_tracker_sigma: float = DEFAULT_STAR_TRACKER_SIGMA_ARCSEC * ARCSEC
    gyro_bias: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GYRO_BIAS_DEG_H) * DEG_PER_HOUR)
    gyro_sigma: float = DEFAULT_GYRO_SIGMA_DEG_H * DEG_PER_HOUR
    tracked_landmarks: int = DEFAULT_TRACKED_LANDMARKS
    quantization_variance: bool = True

    def __post_init__(self) -> None:
        for name in ("pixel_sigma", "lidar_sigma", "star_tracker_sigma", "gyro_sigma"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


def camera_vectors(
    positions_a: np.ndarray,
    x_orb: Mee,
    sigma_bi: Mrp,
    camera: CameraModel,
    t: float,
    asteroid: AsteroidModel,
) -> np.ndarray:
    """Line-of-sight vectors ρ_C from the spacecraft to each landmark, camera axes."""
    rot_ia = spin_rotation(asteroid.rotation_angle(t))
    lmk_i = np.asarray(positions_a, dtype=float) @ rot_ia.T
    rel_i = lmk_i - mee_position(x_orb)[..., None, :]
    rot_ci = camera.mount @ mrp_to_rotation(sigma_bi)
    return np.einsum("ij,...lj->...li", rot_ci, rel_i)


def select_landmarks(
    catalog: LandmarkCatalog,
    x_orb: Mee,
    sigma_bi: Mrp,
    camera: CameraModel,
    q_max: int,
    t: float,
    asteroid: AsteroidModel,
) -> list[str]:
    """Visible landmarks closest to the boresight, at most q_max of them."""
    rho = camera_vectors(catalog.positions, x_orb, sigma_bi, camera, t, asteroid)
    rng = np.linalg.norm(rho, axis=-1)
    off_axis = np.arccos(np.clip(rho[:, 2] / rng, -1.0, 1.0))

    rot_ai = spin_rotation(asteroid.rotation_angle(t)).T
    sc_a = rot_ai @ mee_position(x_orb)
    near_side = np.einsum("li,li->l", catalog.positions, sc_a - catalog.positions) > 0.0

    visible = (rho[:, 2] > 0.0) & (off_axis <= camera.fov / 2.0) & near_side
    candidates = np.flatnonzero(visible)
    order = candidates[np.argsort(off_axis[candidates], kind="stable")]
    selected = [catalog.ids[n] for n in order[:q_max]]
    _LOGGER.debug("Selected %d of %d visible landmarks", len(selected), candidates.size)
    return selected


def camera_project(
    landmark: Landmark,
    x_orb: Mee,
    sigma_bi: Mrp,
    camera: CameraModel,
    t: float,
    asteroid: AsteroidModel,
) -> tuple[tuple[int, int], float]:
    """Quantized pixel coordinates and range of one landmark."""
    rho = camera_vectors(landmark.position[None, :], x_orb, sigma_bi, camera, t, asteroid)[0]
    if rho[2] <= 0.0:
        raise ValueError(f"Landmark {landmark.id} is behind the image plane")
    scale = camera.focal_length / (rho[2] * camera.pixel_width)
    pixel = (int(np.floor(rho[0] * scale)), int(np.floor(rho[1] * scale)))
    return pixel, float(np.linalg.norm(rho))


def orbit_measurement_fn(
    y_orb: npt.ArrayLike,
    sigma_bi: Mrp,
    positions_a: np.ndarray,
    camera: CameraModel,
    t: float,
    asteroid: AsteroidModel,
) -> np.ndarray:
    """Unquantized pixels and ranges [u, v, ρ] per landmark for each state row."""
    y_orb = np.asarray(y_orb, dtype=float)
    rho = camera_vectors(positions_a, y_orb[..., :6], sigma_bi, camera, t, asteroid)
    rng = np.linalg.norm(rho, axis=-1)
    depth = rho[..., 2]
    floor = FAR_FIELD_DEPTH_RATIO * rng
    behind = depth <= floor
    if np.any(behind):
        _LOGGER.warning("Clamped %d landmark predictions behind the image plane", int(behind.sum()))
        depth = np.where(behind, floor, depth)
    scale = camera.focal_length / (depth * camera.pixel_width)
    z = np.stack([rho[..., 0] * scale, rho[..., 1] * scale, rng], axis=-1)
    return z.reshape(z.shape[:-2] + (-1,))


def attitude_measurement_fn(y_att: npt.ArrayLike) -> np.ndarray:
    """Star-tracker MRP and bias-shifted gyro rate."""
    y_att = np.asarray(y_att, dtype=float)
    return np.concatenate([y_att[..., 0:3], y_att[..., 3:ATTITUDE_DIM] + y_att[..., -3:]], axis=-1)


def simulate_orbit_measurement(
    truth: TruthState,
    landmark_ids: Sequence[str],
    catalog: LandmarkCatalog,
    suite: SensorSuite,
    asteroid: AsteroidModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """Noisy quantized pixels and noisy ranges of the selected landmarks."""
    if not landmark_ids:
        raise ValueError("At least one landmark is required")
    exact = orbit_measurement_fn(
        truth.x_orb, truth.sigma_bi, catalog.positions_of(landmark_ids), suite.camera, truth.t, asteroid
    ).reshape(-1, 3)
    pixels = np.floor(exact[:, :2] + suite.pixel_sigma * rng.standard_normal((len(landmark_ids), 2)))
    ranges = exact[:, 2] + suite.lidar_sigma * rng.standard_normal(len(landmark_ids))
    return np.column_stack([pixels, ranges]).ravel()


def simulate_attitude_measurement(
    truth: TruthState, suite: SensorSuite, rng: np.random.Generator
) -> np.ndarray:
    """Star-tracker MRP and gyro rate [σ_star, ω_gyro]."""
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = suite.star_tracker_sigma * rng.standard_normal()
    sigma_star = mrp_compose(truth.sigma_bi, axis * np.tan(angle / 4.0))
    omega_gyro = truth.omega + suite.gyro_bias + suite.gyro_sigma * rng.standard_normal(3)
    return np.concatenate([sigma_star, omega_gyro])
