"""Dense strictly convex box-constrained QP solver with KKT certification."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .const import DEFAULT_QP_MAX_ITER, DEFAULT_QP_TOL
from .exceptions import QpNotConverged

_LOGGER = logging.getLogger(__name__)

AT_LOWER = -1
FREE = 0
AT_UPPER = 1


@dataclass(frozen=True, eq=False)
class QpProblem:
    """min xᵀHx + 2cᵀx  subject to  lb ≤ x ≤ ub."""

    h: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        if h.shape != (n, n):
            raise ValueError(f"Hessian shape {h.shape} does not match {n} variables")
        if not np.allclose(h, h.T, rtol=1e-12, atol=1e-14 * max(1.0, float(np.abs(h).max(initial=0.0)))):
            raise ValueError("Hessian must be symmetric")
        if np.any(lb > ub):
            raise ValueError("Lower bounds must not exceed upper bounds")
        object.__setattr__(self, "h", 0.5 * (h + h.T))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def size(self) -> int:
        return self.c.size

    def objective(self, x: npt.ArrayLike) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.h @ x + 2.0 * self.c @ x)


class KktResiduals(NamedTuple):
    """Optimality residuals of a candidate point."""

    stationarity: float
    primal: float
    complementarity: float


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Minimizer, final working set and certification."""

    x: np.ndarray
    active: np.ndarray
    kkt: KktResiduals
    iterations: int
    objective: float


def kkt_residuals(prob: QpProblem, x: npt.ArrayLike, tol: float = DEFAULT_QP_TOL) -> KktResiduals:
    """Projected-gradient stationarity, bound violation and complementarity of x.

    Uses only the problem data, so it certifies any solver's output.
    """
    x = np.asarray(x, dtype=float)
    grad = prob.h @ x + prob.c
    at_lb = np.isfinite(prob.lb) & (x - prob.lb <= tol * np.maximum(1.0, np.abs(prob.lb)))
    at_ub = np.isfinite(prob.ub) & (prob.ub - x <= tol * np.maximum(1.0, np.abs(prob.ub)))
    projected = np.where(at_lb, np.minimum(grad, 0.0), grad)
    projected = np.where(at_ub, np.maximum(projected, 0.0), projected)
    projected = np.where(at_lb & at_ub, 0.0, projected)

    # multipliers live only on bounds the point sits on
    mult_lb = np.where(at_lb, np.maximum(grad, 0.0), 0.0)
    mult_ub = np.where(at_ub, np.maximum(-grad, 0.0), 0.0)
    slack_lb = np.where(at_lb, x - prob.lb, 0.0)
    slack_ub = np.where(at_ub, prob.ub - x, 0.0)
    comp = np.abs(mult_lb * slack_lb) + np.abs(mult_ub * slack_ub)
    primal = float(np.max(np.concatenate([prob.lb - x, x - prob.ub, [0.0]])))
    return KktResiduals(float(np.abs(projected).max(initial=0.0)), primal, float(comp.max(initial=0.0)))


def _initial_working_set(prob: QpProblem, x: np.ndarray) -> np.ndarray:
    active = np.full(prob.size, FREE, dtype=np.int8)
    active[x <= prob.lb] = AT_LOWER
    active[(x >= prob.ub) & (active == FREE)] = AT_UPPER
    return active


def _subproblem(prob: QpProblem, x: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Minimizer over the free coordinates with the working set held fixed."""
    target = x.copy()
    if not free.any():
        return target
    fixed = ~free
    rhs = -(prob.c[free] + prob.h[np.ix_(free, fixed)] @ x[fixed])
    try:
        factor = scipy.linalg.cho_factor(prob.h[np.ix_(free, free)], lower=True)
    except np.linalg.LinAlgError as err:
        raise ValueError("Hessian must be positive definite") from err
    target[free] = scipy.linalg.cho_solve(factor, rhs)
    return target


def solve_box_qp(
    prob: QpProblem,
    tol: float = DEFAULT_QP_TOL,
    max_iter: int = DEFAULT_QP_MAX_ITER,
    warm_start: npt.ArrayLike | None = None,
) -> QpSolution:
    """Primal active-set method.

    Starts from the warm start (or zero) projected onto the box. Blocking
    bounds are added one at a time, the first minimal step winning; the
    working-set bound with the most negative multiplier is released, ties
    going to the lowest index.
    """
    x = np.zeros(prob.size) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    if x.shape != (prob.size,):
        raise ValueError("Warm start has the wrong dimension")
    x = np.clip(x, prob.lb, prob.ub)
    active = _initial_working_set(prob, x)
    x[active == AT_LOWER] = prob.lb[active == AT_LOWER]
    x[active == AT_UPPER] = prob.ub[active == AT_UPPER]
    dual_tol = tol * (1.0 + float(np.abs(prob.c).max(initial=0.0)))

    for iteration in range(1, max_iter + 1):
        free = active == FREE
        step = _subproblem(prob, x, free) - x
        if np.abs(step).max(initial=0.0) <= tol * max(1.0, float(np.abs(x).max(initial=0.0))):
            grad = prob.h @ x + prob.c
            multipliers = np.where(active == AT_LOWER, grad, np.where(active == AT_UPPER, -grad, np.inf))
            worst = int(np.argmin(multipliers))
            if multipliers[worst] >= -dual_tol:
                kkt = kkt_residuals(prob, x, tol)
                _LOGGER.debug("QP converged in %d iterations, %d bounds active", iteration, int((~free).sum()))
                return QpSolution(x, active.copy(), kkt, iteration, prob.objective(x))
            active[worst] = FREE
            continue

        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_lb = np.where(step < 0.0, (prob.lb - x) / step, np.inf)
            ratio_ub = np.where(step > 0.0, (prob.ub - x) / step, np.inf)
        ratios = np.minimum(ratio_lb, ratio_ub)
        ratios[~free] = np.inf
        blocking = int(np.argmin(ratios))
        alpha = min(1.0, float(ratios[blocking]))
        x = x + alpha * step
        if alpha < 1.0:
            if ratio_lb[blocking] <= ratio_ub[blocking]:
                active[blocking] = AT_LOWER
                x[blocking] = prob.lb[blocking]
            else:
                active[blocking] = AT_UPPER
                x[blocking] = prob.ub[blocking]

    _LOGGER.error("QP did not converge within %d iterations", max_iter)
    raise QpNotConverged(f"Active-set QP did not converge within {max_iter} iterations")
