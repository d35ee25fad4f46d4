"""Inhomogeneous gravity field, solar perturbations and gravity-gradient torque."""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from .const import AU, MU_SUN, P_1AU
from .elements import (
    Mee,
    Mrp,
    SphericalCoords,
    mee_position,
    mrp_to_rotation,
    rot_asteroid_from_spherical,
    rot_orbit_from_inertial,
    spherical_from_position,
    spin_rotation,
)

_LOGGER = logging.getLogger(__name__)


def coefficient_count(degree: int) -> int:
    """Number of C/S entries for degrees 2..degree."""
    return max(0, (degree + 1) ** 2 - 4)


def coefficient_labels(degree: int) -> list[str]:
    """Labels of the packed gravity block: C20, C21, C22, S21, S22, C30, ..."""
    labels: list[str] = []
    for i in range(2, degree + 1):
        labels.extend(f"C{i}{j}" for j in range(i + 1))
        labels.extend(f"S{i}{j}" for j in range(1, i + 1))
    return labels


def pack_coefficients(c: np.ndarray, s: np.ndarray, degree: int) -> np.ndarray:
    """Flatten coefficient tables into the packed gravity block."""
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    parts = []
    for i in range(2, degree + 1):
        parts.extend(c[..., i, j] for j in range(i + 1))
        parts.extend(s[..., i, j] for j in range(1, i + 1))
    if not parts:
        return np.zeros(c.shape[:-2] + (0,))
    return np.stack(parts, axis=-1)


def unpack_coefficients(vector: npt.ArrayLike, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild (C, S) tables of shape (..., degree+1, degree+1) from a packed block."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape[-1] != coefficient_count(degree):
        raise ValueError(
            f"Gravity block of length {vector.shape[-1]} does not match degree {degree}"
        )
    shape = vector.shape[:-1] + (degree + 1, degree + 1)
    c = np.zeros(shape)
    s = np.zeros(shape)
    idx = 0
    for i in range(2, degree + 1):
        for j in range(i + 1):
            c[..., i, j] = vector[..., idx]
            idx += 1
        for j in range(1, i + 1):
            s[..., i, j] = vector[..., idx]
            idx += 1
    return c, s


@dataclass(frozen=True, eq=False)
class GravityModel:
    """Fully normalized spherical-harmonics gravity model."""

    mu: float
    radius: float
    degree: int
    c: np.ndarray
    s: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.c, dtype=float)
        s = np.array(self.s, dtype=float)
        size = self.degree + 1
        if c.shape != (size, size) or s.shape != (size, size):
            raise ValueError(f"Coefficient tables must be {size}x{size}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise ValueError("Gravity coefficients must be finite")
        if self.mu <= 0.0 or self.radius <= 0.0:
            raise ValueError("Gravity parameter and reference radius must be positive")
        c[:2, :] = 0.0
        s[:2, :] = 0.0
        s[:, 0] = 0.0
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", s)

    @classmethod
    def point_mass(cls, mu: float, radius: float, degree: int = 2) -> GravityModel:
        """Model with every harmonic coefficient zero."""
        size = degree + 1
        return cls(mu=mu, radius=radius, degree=degree, c=np.zeros((size, size)), s=np.zeros((size, size)))

    def truncated(self, degree: int) -> GravityModel:
        """Copy of the model limited (or zero padded) to the given degree."""
        size = degree + 1
        c = np.zeros((size, size))
        s = np.zeros((size, size))
        keep = min(size, self.degree + 1)
        c[:keep, :keep] = self.c[:keep, :keep]
        s[:keep, :keep] = self.s[:keep, :keep]
        return replace(self, degree=degree, c=c, s=s)

    def packed(self, degree: int | None = None) -> np.ndarray:
        """Packed gravity block up to the given degree."""
        degree = self.degree if degree is None else degree
        model = self.truncated(degree)
        return pack_coefficients(model.c, model.s, degree)

    def with_packed(self, vector: npt.ArrayLike) -> GravityModel:
        """Model whose coefficients come from a packed gravity block."""
        vector = np.asarray(vector, dtype=float)
        degree = int(round(np.sqrt(vector.shape[-1] + 4))) - 1
        c, s = unpack_coefficients(vector, degree)
        return replace(self, degree=degree, c=c, s=s)


@dataclass(frozen=True)
class AsteroidModel:
    """Uniformly rotating small body."""

    gravity: GravityModel
    spin_rate: float
    spin_epoch_angle: float = 0.0

    @property
    def mu(self) -> float:
        return self.gravity.mu

    def rotation_angle(self, t: npt.ArrayLike) -> np.ndarray:
        """Angle of the asteroid frame about k_A at time t."""
        return self.spin_epoch_angle + self.spin_rate * np.asarray(t, dtype=float)

    def with_gravity(self, gravity: GravityModel) -> AsteroidModel:
        return replace(self, gravity=gravity)


@dataclass(frozen=True, eq=False)
class SolarModel:
    """Sun third-body and radiation-pressure environment."""

    sun_position: np.ndarray = field(default_factory=lambda: np.array([1.46 * AU, 0.0, 0.0]))
    mu_sun: float = MU_SUN
    p_1au: float = P_1AU
    r_1au: float = AU
    enabled: bool = True


@dataclass(frozen=True, eq=False)
class MassDistribution:
    """Lumped point masses in the body frame."""

    offsets: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        offsets = np.atleast_2d(np.asarray(self.offsets, dtype=float))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if offsets.shape != (masses.size, 3):
            raise ValueError("Each point mass needs one 3-vector offset")
        if masses.sum() <= 0.0 or np.any(masses < 0.0):
            raise ValueError("Point masses must be non-negative with positive total")
        if np.linalg.norm(masses @ offsets) > 1e-9 * max(1.0, masses.sum()):
            raise ValueError("Center of mass of the point masses is not at the origin")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "masses", masses)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def inertia(self) -> np.ndarray:
        """Inertia tensor about the origin."""
        sq = np.sum(self.offsets**2, axis=1)
        outer = np.einsum("l,li,lj->ij", self.masses, self.offsets, self.offsets)
        return np.eye(3) * float(self.masses @ sq) - outer


class LegendreTable(NamedTuple):
    """Normalized associated Legendre values indexed [degree, order, ...]."""

    p: np.ndarray
    dp_dx: np.ndarray
    dp_dphi: np.ndarray


@functools.lru_cache(maxsize=None)
def _recursion_factors(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Column recursion factors a_nm, b_nm of the normalized functions."""
    a = np.zeros((n_max + 1, n_max + 1))
    b = np.zeros_like(a)
    for m in range(n_max + 1):
        for n in range(m + 2, n_max + 1):
            a[n, m] = np.sqrt((2.0 * n + 1.0) * (2.0 * n - 1.0) / ((n - m) * (n + m)))
            b[n, m] = np.sqrt(
                (2.0 * n + 1.0) * (n + m - 1.0) * (n - m - 1.0)
                / ((n - m) * (n + m) * (2.0 * n - 3.0))
            )
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def _stripped_legendre(n_max: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P̄_nm / cos^m φ and its x-derivative, finite at the poles."""
    a, b = _recursion_factors(n_max)
    q = np.zeros((n_max + 1, n_max + 1) + x.shape)
    dq = np.zeros_like(q)
    q[0, 0] = 1.0
    for m in range(n_max + 1):
        if m == 1:
            q[1, 1] = np.sqrt(3.0)
        elif m > 1:
            q[m, m] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * q[m - 1, m - 1]
        if m + 1 <= n_max:
            q[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * q[m, m]
            dq[m + 1, m] = np.sqrt(2.0 * m + 3.0) * q[m, m]
        for n in range(m + 2, n_max + 1):
            q[n, m] = a[n, m] * x * q[n - 1, m] - b[n, m] * q[n - 2, m]
            dq[n, m] = a[n, m] * (q[n - 1, m] + x * dq[n - 1, m]) - b[n, m] * dq[n - 2, m]
    return q, dq


def legendre_normalized(n_max: int, x: npt.ArrayLike) -> LegendreTable:
    """Fully normalized associated Legendre functions of x = sinφ.

    Order-one x-derivatives diverge at |x| = 1 and are returned as zero there;
    the cosφ-weighted derivative dp_dphi stays finite everywhere.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("Legendre argument must satisfy |x| <= 1")
    u = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    q, dq = _stripped_legendre(n_max, x)
    p = np.zeros_like(q)
    dp_dx = np.zeros_like(q)
    dp_dphi = np.zeros_like(q)
    at_pole = u == 0.0
    for m in range(n_max + 1):
        um = u**m
        p[:, m] = q[:, m] * um
        dp_dphi[:, m] = u ** (m + 1) * dq[:, m]
        if m == 0:
            dp_dx[:, 0] = dq[:, 0]
            continue
        dp_dphi[:, m] -= m * x * u ** (m - 1) * q[:, m]
        if m == 1:
            safe_u = np.where(at_pole, 1.0, u)
            dp_dx[:, 1] = np.where(at_pole, 0.0, u * dq[:, 1] - x * q[:, 1] / safe_u)
        else:
            dp_dx[:, m] = um * dq[:, m] - m * x * u ** (m - 2) * q[:, m]
    return LegendreTable(p=p, dp_dx=dp_dx, dp_dphi=dp_dphi)


def _harmonics_spherical(
    mu: float,
    radius: float,
    c: np.ndarray,
    s: np.ndarray,
    r: np.ndarray,
    lon: np.ndarray,
    lat: np.ndarray,
) -> np.ndarray:
    """Series acceleration in (radial, east, north) axes for broadcastable inputs."""
    degree = c.shape[-1] - 1
    r, lon, lat = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, lon, lat)))
    if np.any(r < radius):
        _LOGGER.warning(
            "Gravity series evaluated inside the reference sphere (min r = %.1f m < %.1f m)",
            float(np.min(r)),
            radius,
        )
    shape = np.broadcast_shapes(r.shape, c.shape[:-2])
    if degree < 2 or not (np.any(c) or np.any(s)):
        return np.zeros(shape + (3,))
    x = np.sin(lat)
    u = np.cos(lat)
    q, dq = _stripped_legendre(degree, x)
    u_pow = [np.ones_like(u)]
    for _ in range(degree + 1):
        u_pow.append(u_pow[-1] * u)
    cos_j = [np.cos(j * lon) for j in range(degree + 1)]
    sin_j = [np.sin(j * lon) for j in range(degree + 1)]
    acc_r = np.zeros(shape)
    acc_e = np.zeros_like(acc_r)
    acc_n = np.zeros_like(acc_r)
    for i in range(2, degree + 1):
        ratio = (radius / r) ** i
        for j in range(i + 1):
            cij, sij = c[..., i, j], s[..., i, j]
            even = cij * cos_j[j] + sij * sin_j[j]
            acc_r += -(i + 1) * ratio * q[i, j] * u_pow[j] * even
            dp_dphi = u_pow[j + 1] * dq[i, j]
            if j:
                odd = sij * cos_j[j] - cij * sin_j[j]
                acc_e += ratio * j * q[i, j] * u_pow[j - 1] * odd
                dp_dphi = dp_dphi - j * x * u_pow[j - 1] * q[i, j]
            acc_n += ratio * dp_dphi * even
    return np.stack([acc_r, acc_e, acc_n], axis=-1) * (mu / r**2)[..., None]


def harmonics_accel_spherical(model: GravityModel, coords: SphericalCoords) -> np.ndarray:
    """Non-central acceleration of the field in (radial, east, north) axes."""
    return _harmonics_spherical(model.mu, model.radius, model.c, model.s, coords.r, coords.lon, coords.lat)


def gravity_accel_asteroid(
    mu: float,
    radius: float,
    c: np.ndarray,
    s: np.ndarray,
    pos_a: np.ndarray,
    *,
    include_central: bool = False,
) -> np.ndarray:
    """Acceleration in asteroid-frame cartesian axes at asteroid-frame positions."""
    coords = spherical_from_position(pos_a)
    acc_s = _harmonics_spherical(mu, radius, c, s, coords.r, coords.lon, coords.lat)
    acc_a = np.einsum("...ij,...j->...i", rot_asteroid_from_spherical(coords.lon, coords.lat), acc_s)
    if include_central:
        acc_a = acc_a - mu * pos_a / (coords.r**3)[..., None]
    return acc_a


def gravity_accel_inertial(
    mu: float,
    radius: float,
    c: np.ndarray,
    s: np.ndarray,
    pos_i: np.ndarray,
    angle: npt.ArrayLike,
    *,
    include_central: bool = False,
) -> np.ndarray:
    """Acceleration in inertial axes with the asteroid rotated by the given angle."""
    rot_ia = spin_rotation(angle)
    pos_a = np.einsum("...ji,...j->...i", rot_ia, pos_i)
    acc_a = gravity_accel_asteroid(mu, radius, c, s, pos_a, include_central=include_central)
    return np.einsum("...ij,...j->...i", rot_ia, acc_a)


def gravity_accel_orbit_frame(
    model: GravityModel,
    x: Mee,
    t: float,
    asteroid: AsteroidModel,
    *,
    coefficients: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Harmonics acceleration projected into the orbit frame.

    ``coefficients`` overrides the model tables with per-sample (C, S) arrays.
    """
    c, s = coefficients if coefficients is not None else (model.c, model.s)
    acc_i = gravity_accel_inertial(
        model.mu, model.radius, c, s, mee_position(x), asteroid.rotation_angle(t)
    )
    return np.einsum("...ij,...j->...i", rot_orbit_from_inertial(x), acc_i)


def _third_body_inertial(pos_i: np.ndarray, solar: SolarModel) -> np.ndarray:
    sun = np.asarray(solar.sun_position, dtype=float)
    sun2 = sun @ sun
    q = np.sum(pos_i * (pos_i - 2.0 * sun), axis=-1) / sun2
    big_f = q * (3.0 + 3.0 * q + q * q) / (1.0 + (1.0 + q) ** 1.5)
    rel = sun - pos_i
    dist3 = np.linalg.norm(rel, axis=-1) ** 3
    return -(solar.mu_sun / dist3)[..., None] * (pos_i + big_f[..., None] * sun)


def sun_third_body(x: Mee, solar: SolarModel) -> np.ndarray:
    """Solar tidal acceleration in the orbit frame."""
    pos_i = mee_position(x)
    return np.einsum("...ij,...j->...i", rot_orbit_from_inertial(x), _third_body_inertial(pos_i, solar))


def srp_accel(x: Mee, solar: SolarModel, reflectivity: float, area: float, mass: float) -> np.ndarray:
    """Solar radiation pressure acceleration in the orbit frame."""
    if mass <= 0.0:
        raise ValueError("Spacecraft mass must be positive")
    sun = np.asarray(solar.sun_position, dtype=float)
    pos_i = mee_position(x)
    rel = sun - pos_i
    unit = rel / np.linalg.norm(rel, axis=-1, keepdims=True)
    magnitude = reflectivity * solar.p_1au * area / mass * (solar.r_1au / np.linalg.norm(sun)) ** 2
    return -magnitude * np.einsum("...ij,...j->...i", rot_orbit_from_inertial(x), unit)


def gravity_gradient_torque_body(
    mu: float,
    radius: float,
    c: np.ndarray,
    s: np.ndarray,
    masses: MassDistribution,
    pos_i: np.ndarray,
    rot_bi: np.ndarray,
    angle: npt.ArrayLike,
) -> np.ndarray:
    """Σ m Δr × a^B over the point masses for a body at pos_i with attitude rot_bi."""
    pos_i = np.asarray(pos_i, dtype=float)
    if np.any(np.linalg.norm(pos_i, axis=-1) < radius):
        _LOGGER.warning("Gravity-gradient torque evaluated inside the reference sphere")
    arms_i = np.einsum("...ji,lj->...li", rot_bi, masses.offsets)
    points = pos_i[..., None, :] + arms_i
    c_b = np.asarray(c)[..., None, :, :]
    s_b = np.asarray(s)[..., None, :, :]
    angle = np.asarray(angle, dtype=float)[..., None] if np.ndim(angle) else angle
    acc_i = gravity_accel_inertial(mu, radius, c_b, s_b, points, angle, include_central=True)
    acc_b = np.einsum("...ij,...lj->...li", rot_bi, acc_i)
    return np.einsum("l,...li->...i", masses.masses, np.cross(masses.offsets, acc_b))


def gravity_gradient_torque(
    model: GravityModel,
    masses: MassDistribution,
    x: Mee,
    sigma_bo: Mrp,
    t: float,
    asteroid: AsteroidModel,
) -> np.ndarray:
    """Gravity-gradient torque in body axes for an orbit-relative attitude."""
    rot_bi = mrp_to_rotation(sigma_bo) @ rot_orbit_from_inertial(x)
    return gravity_gradient_torque_body(
        model.mu, model.radius, model.c, model.s, masses, mee_position(x), rot_bi, asteroid.rotation_angle(t)
    )
