"""Gravity coefficient and landmark files, plus synthetic stand-ins."""
from __future__ import annotations

import io
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .const import DEFAULT_LANDMARK_COUNT, DEFAULT_SEMI_AXES_M, NORMALIZATION_4PI, NORMALIZATIONS
from .exceptions import DataFileError
from .gravity import GravityModel
from .sensors import LandmarkCatalog

_LOGGER = logging.getLogger(__name__)

HEADER_KEYS = ("mu_m3s2", "Re_m", "degree", "normalization")
COEFFICIENT_COLUMNS = ["i", "j", "C", "S"]
LANDMARK_COLUMNS = ["id", "x_m", "y_m", "z_m"]

SYNTHETIC_C20 = -0.0526
SYNTHETIC_C22 = 0.0824
SYNTHETIC_S22 = -0.0277
SYNTHETIC_HIGH_DEGREE_SIGMA = 0.01


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as err:
        raise DataFileError(path, f"cannot read file: {err}") from err


def _split_header(path: Path, text: str) -> tuple[dict[str, str], str]:
    """`key = value` lines up to the column header row; the rest is CSV."""
    header: dict[str, str] = {}
    lines = text.splitlines()
    for number, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            header[key] = value
            continue
        return header, "\n".join(lines[number:])
    raise DataFileError(path, "no coefficient table found")


def load_gravity_coefficients(path: str | Path) -> GravityModel:
    """Parse a coefficient file; (i, j) pairs not listed are zero."""
    path = Path(path)
    header, table = _split_header(path, _read_text(path))
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise DataFileError(path, f"missing header keys {', '.join(missing)}")
    if header["normalization"] not in NORMALIZATIONS:
        raise DataFileError(path, f"unknown normalization tag {header['normalization']!r}")
    try:
        mu = float(header["mu_m3s2"])
        radius = float(header["Re_m"])
        degree = int(header["degree"])
    except ValueError as err:
        raise DataFileError(path, f"malformed header value: {err}") from err
    if degree < 2:
        raise DataFileError(path, "degree must be at least 2")

    try:
        frame = pd.read_csv(io.StringIO(table), skipinitialspace=True, comment="#", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise DataFileError(path, f"malformed coefficient table: {err}") from err
    if list(frame.columns) != COEFFICIENT_COLUMNS:
        raise DataFileError(path, f"expected columns {COEFFICIENT_COLUMNS}, found {list(frame.columns)}")
    if frame.isna().any().any():
        raise DataFileError(path, "coefficient rows with missing fields")
    if not (frame["i"] == frame["i"].round()).all() or not (frame["j"] == frame["j"].round()).all():
        raise DataFileError(path, "degree and order must be integers")
    frame = frame.astype({"i": int, "j": int})
    duplicated = frame[frame.duplicated(["i", "j"], keep=False)]
    if not duplicated.empty:
        first = duplicated.iloc[0]
        raise DataFileError(path, f"duplicate row for (i, j) = ({first['i']}, {first['j']})")
    bad = frame[(frame["j"] < 0) | (frame["j"] > frame["i"]) | (frame["i"] > degree)]
    if not bad.empty:
        first = bad.iloc[0]
        raise DataFileError(path, f"row (i, j) = ({first['i']}, {first['j']}) outside degree {degree}")

    c = np.zeros((degree + 1, degree + 1))
    s = np.zeros((degree + 1, degree + 1))
    kept = frame[frame["i"] >= 2]
    c[kept["i"].to_numpy(), kept["j"].to_numpy()] = kept["C"].to_numpy(dtype=float)
    s[kept["i"].to_numpy(), kept["j"].to_numpy()] = kept["S"].to_numpy(dtype=float)
    _LOGGER.debug("Loaded %d coefficient rows up to degree %d from %s", len(kept), degree, path)
    try:
        return GravityModel(mu=mu, radius=radius, degree=degree, c=c, s=s)
    except ValueError as err:
        raise DataFileError(path, str(err)) from err


def write_gravity_coefficients(model: GravityModel, path: str | Path) -> Path:
    """Write every (i, j) row of the model at full precision."""
    path = Path(path)
    rows = [(i, j, model.c[i, j], model.s[i, j]) for i in range(2, model.degree + 1) for j in range(i + 1)]
    frame = pd.DataFrame(rows, columns=COEFFICIENT_COLUMNS)
    header = (
        f"mu_m3s2 = {model.mu!r}\n"
        f"Re_m = {model.radius!r}\n"
        f"degree = {model.degree}\n"
        f"normalization = {NORMALIZATION_4PI}\n"
    )
    try:
        path.write_text(header + frame.to_csv(index=False, float_format="%.17g"), encoding="utf-8")
    except OSError as err:
        raise DataFileError(path, f"cannot write file: {err}") from err
    return path


def load_landmarks(path: str | Path) -> LandmarkCatalog:
    """Rows `id, x_m, y_m, z_m` in the asteroid frame."""
    path = Path(path)
    text = _read_text(path)
    if not text.strip():
        raise DataFileError(path, "empty landmark file")
    try:
        frame = pd.read_csv(
            io.StringIO(text), skipinitialspace=True, comment="#", dtype={"id": str}, float_precision="round_trip"
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise DataFileError(path, f"malformed landmark table: {err}") from err
    if list(frame.columns) != LANDMARK_COLUMNS:
        raise DataFileError(path, f"expected columns {LANDMARK_COLUMNS}, found {list(frame.columns)}")
    if frame.empty:
        raise DataFileError(path, "no landmarks listed")
    if frame.isna().any().any():
        raise DataFileError(path, "landmark rows with missing fields")
    try:
        return LandmarkCatalog(tuple(frame["id"]), frame[LANDMARK_COLUMNS[1:]].to_numpy(dtype=float))
    except ValueError as err:
        raise DataFileError(path, str(err)) from err


def write_landmarks(catalog: LandmarkCatalog, path: str | Path) -> Path:
    path = Path(path)
    frame = pd.DataFrame(catalog.positions, columns=LANDMARK_COLUMNS[1:])
    frame.insert(0, "id", list(catalog.ids))
    try:
        frame.to_csv(path, index=False, float_format="%.17g")
    except OSError as err:
        raise DataFileError(path, f"cannot write file: {err}") from err
    return path


def synthetic_gravity_model(
    mu: float,
    radius: float,
    degree: int,
    rng: np.random.Generator,
    *,
    c20: float = SYNTHETIC_C20,
    c22: float = SYNTHETIC_C22,
    s22: float = SYNTHETIC_S22,
    high_degree_sigma: float = SYNTHETIC_HIGH_DEGREE_SIGMA,
) -> GravityModel:
    """Elongated-body field: fixed degree-2 terms, higher degrees drawn N(0, σ²)."""
    size = degree + 1
    c = np.zeros((size, size))
    s = np.zeros((size, size))
    if degree >= 2:
        c[2, 0], c[2, 2], s[2, 2] = c20, c22, s22
    for i in range(3, size):
        c[i, : i + 1] = high_degree_sigma * rng.standard_normal(i + 1)
        s[i, 1 : i + 1] = high_degree_sigma * rng.standard_normal(i)
    return GravityModel(mu=mu, radius=radius, degree=degree, c=c, s=s)


def synthetic_landmarks(
    rng: np.random.Generator,
    count: int = DEFAULT_LANDMARK_COUNT,
    semi_axes: tuple[float, float, float] = DEFAULT_SEMI_AXES_M,
) -> LandmarkCatalog:
    """Landmarks spread over the surface of a triaxial ellipsoid."""
    if count < 1:
        raise ValueError("At least one landmark is required")
    directions = rng.standard_normal((count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    positions = directions * np.asarray(semi_axes, dtype=float)
    ids = tuple(f"L{n:04d}" for n in range(count))
    return LandmarkCatalog(ids, positions)
