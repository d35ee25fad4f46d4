"""Unscented Kalman filter with innovation-driven process-noise estimation."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .const import CHOLESKY_JITTER, DEFAULT_UKF_ALPHA, DEFAULT_UKF_BETA, DEFAULT_UKF_THETA
from .exceptions import FilterDivergence

_LOGGER = logging.getLogger(__name__)

ProcessFn = Callable[[np.ndarray], np.ndarray]
MeasurementFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean and covariance of a multivariate Gaussian."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"Covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size

    def std(self) -> np.ndarray:
        """Marginal standard deviations."""
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


@dataclass(frozen=True)
class UkfParams:
    """Spread, shape and fading parameters of the filter."""

    alpha: float = DEFAULT_UKF_ALPHA
    theta: float = DEFAULT_UKF_THETA
    beta: float = DEFAULT_UKF_BETA
    lambda_spread: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"Fading factor alpha must lie in [0, 1], got {self.alpha}")
        if self.theta <= 0.0:
            raise ValueError("Spread parameter theta must be positive")

    def spread(self, n: int) -> float:
        """λ_spread for an n-dimensional state, (θ² − 1)n unless set explicitly."""
        if self.lambda_spread is not None:
            return self.lambda_spread
        return (self.theta**2 - 1.0) * n


@dataclass(frozen=True, eq=False)
class UkfNoise:
    """Additive process and measurement covariances."""

    q_y: np.ndarray
    q_z: np.ndarray


class UkfDiagnostics(NamedTuple):
    """Innovation quantities of one update."""

    z_pred: np.ndarray | None
    innovation_cov: np.ndarray | None
    gain: np.ndarray | None
    innovation: np.ndarray | None

    @property
    def skipped(self) -> bool:
        return self.innovation is None


class UkfResult(NamedTuple):
    """Posterior, next process-noise estimate and diagnostics."""

    state: GaussianState
    q_y: np.ndarray
    diagnostics: UkfDiagnostics


def weights(params: UkfParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance weights ordered like the sigma points."""
    lam = params.spread(n)
    scale = n + lam
    if scale <= 0.0:
        raise ValueError(f"n + lambda_spread must be positive, got {scale}")
    w_m = np.full(2 * n + 1, 0.5 / scale)
    w_c = w_m.copy()
    w_m[0] = lam / scale
    w_c[0] = lam / scale + (1.0 - params.theta**2 + params.beta)
    return w_m, w_c


def _cholesky_lower(cov: np.ndarray, what: str) -> np.ndarray:
    """Lower factor with one jitter retry; a zero matrix factors to zero."""
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        if not np.any(cov):
            return np.zeros_like(cov)
        jitter = CHOLESKY_JITTER * np.trace(cov) / cov.shape[0]
        _LOGGER.warning("Cholesky of %s failed, retrying with jitter %.3e", what, jitter)
        try:
            return scipy.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
        except np.linalg.LinAlgError as err:
            raise FilterDivergence(
                f"{what} is not positive definite",
                {"min_eigenvalue": float(np.linalg.eigvalsh(cov).min()), "trace": float(np.trace(cov))},
            ) from err


def _check_psd(cov: np.ndarray) -> None:
    """Reject covariances with eigenvalues below the jitter level."""
    floor = -CHOLESKY_JITTER * max(float(np.trace(cov)), np.finfo(float).tiny)
    min_eig = float(np.linalg.eigvalsh(cov).min())
    if min_eig < floor:
        raise FilterDivergence("Posterior covariance is not positive semidefinite", {"min_eigenvalue": min_eig})


def sigma_points(state: GaussianState, params: UkfParams) -> np.ndarray:
    """Symmetric sigma set of shape (2n+1, n): μ, μ + columns, μ − columns."""
    n = state.dim
    factor = _cholesky_lower((n + params.spread(n)) * state.cov, "sigma-point covariance")
    return np.vstack([state.mean, state.mean + factor.T, state.mean - factor.T])


def _apply(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(fn(points), dtype=float)
    return np.vstack([np.asarray(fn(point), dtype=float) for point in points])


def _weighted_cov(w_c: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a * w_c[:, None]).T @ b


def ukf_predict(
    g: ProcessFn,
    state: GaussianState,
    q_y: np.ndarray,
    params: UkfParams,
    *,
    vectorized: bool = False,
) -> tuple[np.ndarray, GaussianState]:
    """Propagated sigma points and the predicted Gaussian."""
    w_m, w_c = weights(params, state.dim)
    chi = _apply(g, sigma_points(state, params), vectorized)
    mean = w_m @ chi
    dev = chi - mean
    return chi, GaussianState(mean, _weighted_cov(w_c, dev, dev) + q_y)


def ukf_step(
    g: ProcessFn,
    h: MeasurementFn,
    state: GaussianState,
    z: np.ndarray | None,
    noise: UkfNoise,
    params: UkfParams,
    *,
    vectorized: bool = False,
) -> UkfResult:
    """One predict/update cycle. ``z=None`` skips the measurement update.

    With ``vectorized`` the process and measurement functions receive the
    whole (2n+1, n) sigma set at once.
    """
    _, prior = ukf_predict(g, state, noise.q_y, params, vectorized=vectorized)
    if z is None:
        _LOGGER.debug("No measurement, propagation only")
        return UkfResult(prior, noise.q_y, UkfDiagnostics(None, None, None, None))

    w_m, w_c = weights(params, state.dim)
    # redrawn from the prior so the spread carries Q_y
    chi = sigma_points(prior, params)
    zeta = _apply(h, chi, vectorized)
    if zeta.shape[1] != np.size(z) or noise.q_z.shape != (zeta.shape[1], zeta.shape[1]):
        raise ValueError("Measurement, prediction and Q_z dimensions disagree")
    z_pred = w_m @ zeta
    dz = zeta - z_pred
    innovation_cov = _weighted_cov(w_c, dz, dz) + noise.q_z
    innovation_cov = 0.5 * (innovation_cov + innovation_cov.T)
    cross_cov = _weighted_cov(w_c, chi - prior.mean, dz)
    try:
        gain = scipy.linalg.solve(innovation_cov, cross_cov.T, assume_a="sym").T
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as err:
        raise FilterDivergence("Innovation covariance is singular", {"S": innovation_cov}) from err

    innovation = np.asarray(z, dtype=float) - z_pred
    correction = gain @ innovation
    cov = prior.cov - gain @ innovation_cov @ gain.T
    posterior = GaussianState(prior.mean + correction, cov)
    _check_psd(posterior.cov)

    q_y = (1.0 - params.alpha) * np.outer(correction, correction) + params.alpha * noise.q_y
    _LOGGER.debug("UKF update: |innovation| = %.3e, |correction| = %.3e",
                  float(np.linalg.norm(innovation)), float(np.linalg.norm(correction)))
    return UkfResult(posterior, q_y, UkfDiagnostics(z_pred, innovation_cov, gain, innovation))
