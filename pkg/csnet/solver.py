"""L1-minimisation decoders: basis pursuit, basis pursuit denoising and an l0 oracle.

op_count fields are counted scalar multiply-adds of the dominant matrix
work, so decoders can be compared by measured effort rather than by
symbolic complexity classes.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from csnet import settings
from csnet.cs_core import DimensionError, MeasurementMatrix, SparseVector

logger = logging.getLogger(__name__)

# Equality feasibility, relative to ||y||_2
FEASIBILITY_TOL = 1e-8

# Relative objective perturbation used to certify a unique LP minimiser
_PERTURBATION = 1e-4

# Iterations between convergence checks of the first-order method
_CHECK_EVERY = 10


class CapExceededError(ValueError):
    """Raised when an enumeration would exceed its configured cap."""


class RecoveryStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class RecoveryResult:
    solution: SparseVector
    objective: float
    residual_norm: float
    iterations: int
    op_count: int
    status: RecoveryStatus

    @property
    def x(self) -> np.ndarray:
        return self.solution.entries

    @property
    def support(self) -> tuple[int, ...]:
        return self.solution.support_within(support_threshold(self.x))

    @property
    def ok(self) -> bool:
        return self.status is RecoveryStatus.OPTIMAL


@dataclass(frozen=True)
class DenoiseConfig:
    epsilon: float
    max_iterations: int = 10_000
    convergence_tol: float = 1e-4

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")


def support_threshold(x: np.ndarray) -> float:
    """Magnitude below which a recovered coordinate counts as zero."""
    return 1e-6 * max(1.0, float(np.max(np.abs(x), initial=0.0)))


def _result(A, y, x, iterations, op_count, status) -> RecoveryResult:
    return RecoveryResult(
        solution=SparseVector(x),
        objective=float(np.abs(x).sum()),
        residual_norm=float(np.linalg.norm(y - A @ x)),
        iterations=iterations,
        op_count=int(op_count),
        status=status,
    )


def _check_shapes(phi: MeasurementMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (phi.rows,):
        raise DimensionError(f"matrix has {phi.rows} rows but measurements have shape {y.shape}")
    return y


def _consistent_least_squares(A, y) -> tuple[np.ndarray, float]:
    x_ls, *_ = np.linalg.lstsq(A, y, rcond=None)
    return x_ls, float(np.linalg.norm(A @ x_ls - y))


def _solve_lp(A, y, weights) -> tuple[np.ndarray | None, int, int]:
    """min w^T (x+ + x-) s.t. A (x+ - x-) = y, x+, x- >= 0; dual simplex."""
    n = A.shape[1]
    result = linprog(
        np.concatenate([weights, weights]),
        A_eq=np.hstack([A, -A]),
        b_eq=y,
        bounds=(0, None),
        method="highs-ds",
    )
    if result.status == 2 or result.x is None:
        return None, int(result.nit or 0), result.status
    return result.x[:n] - result.x[n:], int(result.nit), result.status


def _polish(A, y, x) -> np.ndarray:
    """Re-solve least squares on the LP vertex's support to remove solver round-off."""
    support = np.flatnonzero(np.abs(x) > support_threshold(x))
    if support.size == 0 or support.size > A.shape[0]:
        return x
    polished = np.zeros_like(x)
    polished[support], *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
    if np.linalg.norm(y - A @ polished) <= np.linalg.norm(y - A @ x):
        return polished
    return x


def basis_pursuit(phi: MeasurementMatrix, y) -> RecoveryResult:
    """Exact minimiser of ||x||_1 subject to Phi x = y.

    Solved as a linear program over the split x = x+ - x-, then polished on
    the vertex support so the equality residual sits at round-off level.
    """
    y = _check_shapes(phi, y)
    A = phi.entries
    m, n = A.shape
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return _result(A, y, np.zeros(n), 0, 0, RecoveryStatus.OPTIMAL)

    _, distance = _consistent_least_squares(A, y)
    op_count = m * n * min(m, n)
    if distance > FEASIBILITY_TOL * y_norm:
        logger.debug("basis pursuit infeasible: distance %.3g from range", distance)
        return _result(A, y, np.zeros(n), 0, op_count, RecoveryStatus.INFEASIBLE)

    x, iterations, status = _solve_lp(A, y, np.ones(n))
    op_count += iterations * m * 2 * n
    if x is None:
        return _result(A, y, np.zeros(n), iterations, op_count, RecoveryStatus.INFEASIBLE)

    x = _polish(A, y, x)
    op_count += m * len(np.flatnonzero(x)) ** 2
    result = _result(A, y, x, iterations, op_count, RecoveryStatus.OPTIMAL if status == 0 else RecoveryStatus.MAX_ITER)
    if result.residual_norm > FEASIBILITY_TOL * y_norm:
        logger.warning("basis pursuit residual %.3g above tolerance", result.residual_norm)
    return result


def certify_unique_minimizer(phi: MeasurementMatrix, y, result: RecoveryResult) -> bool:
    """True when a perturbed-objective re-solve lands on the same solution.

    A unique L1 minimiser stays optimal under small weight perturbations;
    a degenerate optimal face does not.
    """
    if not result.ok:
        return False
    y = _check_shapes(phi, y)
    n = phi.cols
    weights = 1.0 + _PERTURBATION * np.cos(np.arange(1, n + 1))
    x, _, status = _solve_lp(phi.entries, y, weights)
    if x is None or status != 0:
        return False
    x = _polish(phi.entries, y, x)
    return bool(np.allclose(x, result.x, rtol=0, atol=settings.RECOVERY_TOLERANCE))


def _project_ball(v, center, radius):
    offset = v - center
    norm = np.linalg.norm(offset)
    if norm <= radius:
        return v
    return center + offset * (radius / norm)


def _soft_threshold(v, threshold):
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def basis_pursuit_denoise(phi: MeasurementMatrix, y, cfg: DenoiseConfig) -> RecoveryResult:
    """min ||x||_1 subject to ||y - Phi x||_2 <= epsilon.

    Primal-dual hybrid gradient iterations: a shrinkage step on x and the
    conjugate of the L2-ball projection on the dual variable, stopped on
    primal feasibility plus a relative duality gap. The final iterate is
    moved onto the ball along the range of Phi, so an optimal result is
    always feasible. epsilon = 0 is the equality case and runs the exact
    LP path.
    """
    y = _check_shapes(phi, y)
    if cfg.epsilon == 0.0:
        return basis_pursuit(phi, y)

    A = phi.entries
    m, n = A.shape
    eps = cfg.epsilon
    if np.linalg.norm(y) <= eps:
        # the origin is feasible and L1-minimal
        return _result(A, y, np.zeros(n), 0, 0, RecoveryStatus.OPTIMAL)

    x_ls, distance = _consistent_least_squares(A, y)
    op_count = m * n * min(m, n)
    if distance > eps:
        logger.debug("denoise infeasible: range distance %.3g > epsilon %.3g", distance, eps)
        return _result(A, y, x_ls, 0, op_count, RecoveryStatus.INFEASIBLE)

    step = 0.99 / np.linalg.norm(A, 2)
    x = np.zeros(n)
    x_bar = x.copy()
    z = np.zeros(m)
    status = RecoveryStatus.MAX_ITER
    iterations = cfg.max_iterations
    for iteration in range(1, cfg.max_iterations + 1):
        v = z + step * (A @ x_bar)
        z = v - step * _project_ball(v / step, y, eps)
        x_next = _soft_threshold(x - step * (A.T @ z), step)
        x_bar = 2.0 * x_next - x
        x = x_next
        op_count += 2 * m * n
        if iteration % _CHECK_EVERY:
            continue
        residual = float(np.linalg.norm(A @ x - y))
        dual_scale = max(1.0, float(np.max(np.abs(A.T @ z))))
        z_feasible = z / dual_scale
        primal = float(np.abs(x).sum())
        dual = -(float(z_feasible @ y) + eps * float(np.linalg.norm(z_feasible)))
        op_count += 2 * m * n
        if residual <= eps * (1.0 + cfg.convergence_tol) and primal - dual <= cfg.convergence_tol * max(1.0, primal):
            status = RecoveryStatus.OPTIMAL
            iterations = iteration
            break

    x = _restore_feasibility(A, y, x, eps)
    op_count += m * n * min(m, n)
    if status is RecoveryStatus.MAX_ITER:
        logger.debug("denoise stopped after %d iterations without meeting the gap test", iterations)
    return _result(A, y, x, iterations, op_count, status)


def _restore_feasibility(A, y, x, eps) -> np.ndarray:
    """Shrink the residual onto the epsilon ball with a minimum-norm correction."""
    residual = y - A @ x
    norm = np.linalg.norm(residual)
    if norm <= eps:
        return x
    correction, *_ = np.linalg.lstsq(A, residual * (1.0 - eps / norm), rcond=None)
    return x + correction


def l0_oracle(
    phi: MeasurementMatrix,
    y,
    k_max: int,
    cap: int = settings.L0_ORACLE_CAP,
) -> RecoveryResult:
    """Brute-force sparsest consistent solution, the ground truth for tests.

    Supports are tried by size, then lexicographically; among consistent
    supports of the smallest size the lowest residual wins and exact ties go
    to the lexicographically first support.
    """
    y = _check_shapes(phi, y)
    A = phi.entries
    m, n = A.shape
    if math.comb(n, k_max) > cap:
        raise CapExceededError(f"C({n}, {k_max}) exceeds the enumeration cap {cap}")

    y_norm = float(np.linalg.norm(y))
    tolerance = FEASIBILITY_TOL * max(1.0, y_norm)
    tie = 1e-12 * max(1.0, y_norm)
    if y_norm <= tolerance:
        return _result(A, y, np.zeros(n), 1, 0, RecoveryStatus.OPTIMAL)

    op_count = 0
    evaluated = 0
    for size in range(1, k_max + 1):
        best, best_residual = None, math.inf
        for support in combinations(range(n), size):
            columns = A[:, support]
            coefficients, *_ = np.linalg.lstsq(columns, y, rcond=None)
            residual = float(np.linalg.norm(columns @ coefficients - y))
            op_count += m * size * size
            evaluated += 1
            if residual <= tolerance and residual < best_residual - tie:
                best, best_residual = (support, coefficients), residual
        if best is not None:
            x = np.zeros(n)
            x[list(best[0])] = best[1]
            return _result(A, y, x, evaluated, op_count, RecoveryStatus.OPTIMAL)

    raise ValueError(f"no consistent support of size <= {k_max}")
