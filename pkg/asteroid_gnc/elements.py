"""Orbital-element and attitude-parameter algebra.

Every array function follows the trailing-axis convention: an element set is
an array of shape (..., 6), a vector (..., 3) and a rotation matrix
(..., 3, 3), so sigma-point batches flow through unchanged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.spatial.transform import Rotation

from .exceptions import ConversionError

_LOGGER = logging.getLogger(__name__)

Mee = npt.NDArray[np.float64]
Mrp = npt.NDArray[np.float64]
RotationMatrix = npt.NDArray[np.float64]

SHADOW_DENOMINATOR_TOL = 1.0e-5
GIMBAL_LOCK_TOL = 1.0e-9


@dataclass(frozen=True)
class ClassicalElements:
    """Keplerian elements, angles in radians."""

    a: float
    e: float
    i: float
    raan: float
    argp: float
    nu: float

    def __post_init__(self) -> None:
        if not self.a > 0.0:
            raise ConversionError(f"Semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ConversionError(f"Eccentricity must be in [0, 1), got {self.e}")
        if np.isclose(self.i, np.pi, atol=1e-12):
            raise ConversionError("Retrograde equatorial orbits are not supported")


class SphericalCoords(NamedTuple):
    """Radius, longitude and latitude in the asteroid frame."""

    r: npt.NDArray[np.float64] | float
    lon: npt.NDArray[np.float64] | float
    lat: npt.NDArray[np.float64] | float


def _split(x: Mee) -> tuple[np.ndarray, ...]:
    x = np.asarray(x, dtype=float)
    return tuple(np.moveaxis(x, -1, 0))


def wrap_angle(angle: npt.ArrayLike) -> np.ndarray:
    """Wrap an angle to [0, 2π) for presentation."""
    return np.mod(angle, 2.0 * np.pi)


def mee_position(x: Mee) -> np.ndarray:
    """Inertial position of an element set (μ independent)."""
    p, f, g, h, k, L = _split(x)
    cos_l, sin_l = np.cos(L), np.sin(L)
    alpha2 = h**2 - k**2
    s2 = 1.0 + h**2 + k**2
    radius = p / (1.0 + f * cos_l + g * sin_l)
    pos = np.stack(
        [
            cos_l + alpha2 * cos_l + 2.0 * h * k * sin_l,
            sin_l - alpha2 * sin_l + 2.0 * h * k * cos_l,
            2.0 * (h * sin_l - k * cos_l),
        ],
        axis=-1,
    )
    return pos * (radius / s2)[..., None]


def mee_to_cartesian(x: Mee, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Convert modified equinoctial elements to inertial position and velocity."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ConversionError("Non-finite element set")
    p, f, g, h, k, L = _split(x)
    if np.any(p <= 0.0):
        raise ConversionError("Semi-latus rectum must be positive")
    cos_l, sin_l = np.cos(L), np.sin(L)
    alpha2 = h**2 - k**2
    s2 = 1.0 + h**2 + k**2
    scale = np.sqrt(mu / p) / s2
    vel = np.stack(
        [
            -sin_l - alpha2 * sin_l + 2.0 * h * k * cos_l - g + 2.0 * f * h * k - alpha2 * g,
            cos_l - alpha2 * cos_l - 2.0 * h * k * sin_l + f - 2.0 * g * h * k - alpha2 * f,
            2.0 * (h * cos_l + k * sin_l + f * h + g * k),
        ],
        axis=-1,
    )
    return mee_position(x), vel * scale[..., None]


def cartesian_to_mee(position: npt.ArrayLike, velocity: npt.ArrayLike, mu: float) -> Mee:
    """Convert inertial position and velocity to modified equinoctial elements."""
    rr = np.asarray(position, dtype=float)
    vv = np.asarray(velocity, dtype=float)
    radius = np.linalg.norm(rr, axis=-1)
    hv = np.cross(rr, vv)
    hmag = np.linalg.norm(hv, axis=-1)
    if np.any(hmag <= 1e-12 * radius * np.linalg.norm(vv, axis=-1)) or np.any(radius == 0.0):
        raise ConversionError("Zero angular momentum, elements undefined")

    eccen = np.cross(vv, hv) / mu - rr / radius[..., None]
    if np.any(np.linalg.norm(eccen, axis=-1) >= 1.0):
        raise ConversionError("Orbit is not elliptic (e >= 1)")

    hhat = hv / hmag[..., None]
    denom = 1.0 + hhat[..., 2]
    if np.any(denom < 1e-12):
        raise ConversionError("Retrograde equatorial orbit, equinoctial elements singular")
    k = hhat[..., 0] / denom
    h = -hhat[..., 1] / denom

    s2 = 1.0 + h**2 + k**2
    fhat = np.stack([1.0 - k**2 + h**2, 2.0 * k * h, -2.0 * k], axis=-1) / s2[..., None]
    ghat = np.stack([2.0 * k * h, 1.0 + k**2 - h**2, 2.0 * h], axis=-1) / s2[..., None]
    f = np.sum(eccen * fhat, axis=-1)
    g = np.sum(eccen * ghat, axis=-1)

    uhat = rr / radius[..., None]
    rdot = np.sum(rr * vv, axis=-1) / radius
    vhat = (radius[..., None] * vv - rdot[..., None] * rr) / hmag[..., None]
    L = np.arctan2(uhat[..., 1] - vhat[..., 0], uhat[..., 0] + vhat[..., 1])

    return np.stack([hmag**2 / mu, f, g, h, k, L], axis=-1)


def classical_to_mee(oe: ClassicalElements) -> Mee:
    """Convert Keplerian elements to modified equinoctial elements."""
    p = oe.a * (1.0 - oe.e**2)
    lon_peri = oe.raan + oe.argp
    tan_half = np.tan(oe.i / 2.0)
    return np.array(
        [
            p,
            oe.e * np.cos(lon_peri),
            oe.e * np.sin(lon_peri),
            tan_half * np.cos(oe.raan),
            tan_half * np.sin(oe.raan),
            lon_peri + oe.nu,
        ]
    )


def mee_to_classical(x: Mee) -> ClassicalElements:
    """Convert modified equinoctial elements to Keplerian elements."""
    p, f, g, h, k, L = (float(v) for v in np.asarray(x, dtype=float))
    e = np.hypot(f, g)
    raan = np.arctan2(k, h)
    lon_peri = np.arctan2(g, f)
    return ClassicalElements(
        a=p / (1.0 - e**2),
        e=e,
        i=2.0 * np.arctan(np.hypot(h, k)),
        raan=float(wrap_angle(raan)),
        argp=float(wrap_angle(lon_peri - raan)),
        nu=float(wrap_angle(L - lon_peri)),
    )


def spin_rotation(angle: npt.ArrayLike) -> RotationMatrix:
    """Rotation R^I_A taking asteroid-frame components to inertial ones."""
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [np.stack([c, -s, zero], -1), np.stack([s, c, zero], -1), np.stack([zero, zero, one], -1)],
        axis=-2,
    )


def spherical_from_position(pos_a: np.ndarray) -> SphericalCoords:
    """Radius, longitude and latitude of an asteroid-frame position."""
    r = np.linalg.norm(pos_a, axis=-1)
    return SphericalCoords(
        r=r,
        lon=np.arctan2(pos_a[..., 1], pos_a[..., 0]),
        lat=np.arcsin(np.clip(pos_a[..., 2] / r, -1.0, 1.0)),
    )


def rot_asteroid_from_spherical(lon: npt.ArrayLike, lat: npt.ArrayLike) -> RotationMatrix:
    """Rotation R^A_S whose columns are the radial, east and north unit vectors."""
    cl, sl = np.cos(lon), np.sin(lon)
    cp, sp = np.cos(lat), np.sin(lat)
    radial = np.stack([cp * cl, cp * sl, sp], -1)
    east = np.stack([-sl, cl, np.zeros_like(cl)], -1)
    north = np.stack([-sp * cl, -sp * sl, cp], -1)
    return np.stack([radial, east, north], axis=-1)


def mee_to_spherical(x: Mee, asteroid_rotation_angle: npt.ArrayLike) -> SphericalCoords:
    """Spherical coordinates of the spacecraft in the rotating asteroid frame."""
    pos_i = mee_position(x)
    rot_ai = np.swapaxes(spin_rotation(asteroid_rotation_angle), -1, -2)
    return spherical_from_position(np.einsum("...ij,...j->...i", rot_ai, pos_i))


def rot_orbit_from_inertial(x: Mee) -> RotationMatrix:
    """Rotation R^O_I with rows radial, transverse and orbit-normal."""
    p, f, g, h, k, L = _split(x)
    pos = mee_position(x)
    radius = np.linalg.norm(pos, axis=-1)
    if np.any(radius == 0.0):
        raise ConversionError("Zero radius, orbit frame undefined")
    i_hat = pos / radius[..., None]
    s2 = 1.0 + h**2 + k**2
    k_hat = np.stack([2.0 * k, -2.0 * h, 1.0 - h**2 - k**2], axis=-1) / s2[..., None]
    j_hat = np.cross(k_hat, i_hat)
    return np.stack([i_hat, j_hat, k_hat], axis=-2)


def orbit_frame_angular_velocity(x: Mee, a_n: npt.ArrayLike, mu: float) -> np.ndarray:
    """Angular velocity of the orbit frame w.r.t. inertial, orbit-frame axes."""
    p, f, g, h, k, L = _split(x)
    radius = p / (1.0 + f * np.cos(L) + g * np.sin(L))
    h_mom = np.sqrt(mu * p)
    a_n = np.broadcast_to(np.asarray(a_n, dtype=float), radius.shape)
    return np.stack([radius * a_n / h_mom, np.zeros_like(radius), h_mom / radius**2], axis=-1)


def cross_matrix(v: npt.ArrayLike) -> np.ndarray:
    """Skew-symmetric matrix with cross_matrix(a) @ b == a × b."""
    v = np.asarray(v, dtype=float)
    zero = np.zeros_like(v[..., 0])
    return np.stack(
        [
            np.stack([zero, -v[..., 2], v[..., 1]], -1),
            np.stack([v[..., 2], zero, -v[..., 0]], -1),
            np.stack([-v[..., 1], v[..., 0], zero], -1),
        ],
        axis=-2,
    )


def mrp_to_rotation(sigma: Mrp) -> RotationMatrix:
    """Direction cosine matrix of a modified Rodrigues parameter set."""
    sigma = np.asarray(sigma, dtype=float)
    s2 = np.sum(sigma * sigma, axis=-1)[..., None, None]
    sx = cross_matrix(sigma)
    eye = np.broadcast_to(np.eye(3), sx.shape)
    return eye + (8.0 * sx @ sx - 4.0 * (1.0 - s2) * sx) / (1.0 + s2) ** 2


def mrp_shadow(sigma: Mrp) -> Mrp:
    """Shadow set −σ/‖σ‖² describing the same attitude."""
    sigma = np.asarray(sigma, dtype=float)
    s2 = np.sum(sigma * sigma, axis=-1, keepdims=True)
    if np.any(s2 == 0.0):
        raise ConversionError("Shadow set undefined for the zero MRP")
    return -sigma / s2


def mrp_switch(sigma: Mrp) -> Mrp:
    """Map every MRP with norm above one to its shadow set."""
    sigma = np.asarray(sigma, dtype=float)
    s2 = np.sum(sigma * sigma, axis=-1, keepdims=True)
    return np.where(s2 > 1.0, -sigma / np.where(s2 > 1.0, s2, 1.0), sigma)


def mrp_compose(sigma0: Mrp, sigma_rot: Mrp) -> Mrp:
    """Apply rotation σ_rot after σ0, so R(result) = R(σ_rot) R(σ0)."""
    s0 = np.asarray(sigma0, dtype=float)
    sr = np.asarray(sigma_rot, dtype=float)

    def _combine(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
        a2, b2 = a @ a, b @ b
        den = 1.0 + a2 * b2 - 2.0 * (a @ b)
        num = (1.0 - b2) * a + (1.0 - a2) * b + 2.0 * np.cross(a, b)
        return num, den

    num, den = _combine(s0, sr)
    if abs(den) < SHADOW_DENOMINATOR_TOL:
        num, den = _combine(mrp_shadow(s0), sr)
        if abs(den) < SHADOW_DENOMINATOR_TOL:
            raise ConversionError("MRP composition singular after shadow retry")
    return mrp_switch(num / den)


def mrp_kinematics_matrix(sigma: Mrp) -> np.ndarray:
    """Matrix C(σ) with σ̇ = ¼ C(σ) ω."""
    sigma = np.asarray(sigma, dtype=float)
    s2 = np.sum(sigma * sigma, axis=-1)[..., None, None]
    eye = np.broadcast_to(np.eye(3), sigma.shape[:-1] + (3, 3))
    return (1.0 - s2) * eye + 2.0 * cross_matrix(sigma) + 2.0 * sigma[..., :, None] * sigma[..., None, :]


def dcm_to_mrp(dcm: RotationMatrix) -> Mrp:
    """Short-rotation MRP of a direction cosine matrix."""
    active = np.swapaxes(np.asarray(dcm, dtype=float), -1, -2)
    flat = active.reshape(-1, 3, 3)
    sigma = Rotation.from_matrix(flat).as_mrp()
    return mrp_switch(sigma.reshape(active.shape[:-2] + (3,)))


def _axis_rotation(axis: int, angle: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    one, zero = np.ones_like(c), np.zeros_like(c)
    if axis == 0:
        rows = [[one, zero, zero], [zero, c, s], [zero, -s, c]]
    elif axis == 1:
        rows = [[c, zero, -s], [zero, one, zero], [s, zero, c]]
    else:
        rows = [[c, s, zero], [-s, c, zero], [zero, zero, one]]
    return np.stack([np.stack(r, -1) for r in rows], axis=-2)


def rotation_from_euler(pitch: npt.ArrayLike, roll: npt.ArrayLike, yaw: npt.ArrayLike) -> RotationMatrix:
    """Rebuild R^B_O from yaw about x, then roll about y, then pitch about z."""
    pitch, roll, yaw = (np.asarray(a, dtype=float) for a in (pitch, roll, yaw))
    return _axis_rotation(2, pitch) @ _axis_rotation(1, roll) @ _axis_rotation(0, yaw)


def euler_angles_from_mrp(sigma_bo: Mrp) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pitch, roll and yaw angles of the body frame relative to the orbit frame."""
    dcm = mrp_to_rotation(sigma_bo)
    sin_roll = np.clip(dcm[..., 2, 0], -1.0, 1.0)
    if np.any(np.abs(sin_roll) >= 1.0 - GIMBAL_LOCK_TOL):
        raise ConversionError("Euler sequence at gimbal lock (roll = ±90 deg)")
    roll = np.arcsin(sin_roll)
    yaw = np.arctan2(-dcm[..., 2, 1], dcm[..., 2, 2])
    pitch = np.arctan2(-dcm[..., 1, 0], dcm[..., 0, 0])
    return pitch, roll, yaw
