"""Sparse signals, measurement matrices, dimension planning and RIP estimation."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, islice
from pathlib import Path

import numpy as np
from scipy.special import entr

from csnet import settings
from csnet.utils import derive_rng

logger = logging.getLogger(__name__)

# Subsets evaluated per batched SVD call
_SVD_BATCH = 4096


class DimensionError(ValueError):
    """Raised when operand shapes do not fit together."""


class SparsityError(ValueError):
    """Raised when no m <= n satisfies the measurement bound."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class SparseVector:
    """A length-n real vector stored densely; the support is its nonzeros."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen_array(self.entries)
        if entries.ndim != 1 or entries.size < 1:
            raise DimensionError(f"sparse vector must be 1-d and non-empty, got shape {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zeros(cls, n: int) -> "SparseVector":
        return cls(np.zeros(n))

    @classmethod
    def from_support(cls, n: int, support, values) -> "SparseVector":
        entries = np.zeros(n)
        entries[np.asarray(support, dtype=int)] = values
        return cls(entries)

    @property
    def length(self) -> int:
        return self.entries.size

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.entries))

    def support_within(self, tol: float) -> tuple[int, ...]:
        """Indices whose magnitude exceeds tol."""
        return tuple(int(i) for i in np.flatnonzero(np.abs(self.entries) > tol))

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.entries))

    @property
    def alpha(self) -> float:
        return self.sparsity / self.length

    def is_k_sparse(self, k: int) -> bool:
        return self.sparsity <= k


class MatrixKind(str, Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    IDENTITY = "identity"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """An m x n real matrix, optionally the row subset S_m of an n x n parent."""

    entries: np.ndarray
    kind: MatrixKind = MatrixKind.CUSTOM
    row_subset: tuple[int, ...] | None = None

    def __post_init__(self):
        entries = _frozen_array(self.entries)
        if entries.ndim != 2 or 0 in entries.shape:
            raise DimensionError(f"measurement matrix must be 2-d and non-empty, got shape {entries.shape}")
        m, n = entries.shape
        if m > n:
            raise DimensionError(f"measurement matrix needs m <= n, got {m} x {n}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "kind", MatrixKind(self.kind))
        if self.row_subset is not None:
            subset = tuple(int(i) for i in self.row_subset)
            if len(subset) != m or len(set(subset)) != m:
                raise DimensionError("row_subset must list m distinct row indices")
            if min(subset) < 0:
                raise DimensionError("row_subset indices must be non-negative")
            object.__setattr__(self, "row_subset", subset)
        elif self.kind is MatrixKind.BERNOULLI:
            # the +-1/sqrt(m) law only binds root matrices; row subsets keep the parent scale
            if not np.allclose(np.abs(entries), 1.0 / math.sqrt(m), rtol=0, atol=1e-12):
                raise ValueError("bernoulli matrix entries must all be +-1/sqrt(m)")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def select_rows(self, indices) -> "MeasurementMatrix":
        """Phi_S: the rows of this matrix indexed by S_m, in the given order."""
        indices = tuple(int(i) for i in indices)
        if any(i < 0 or i >= self.rows for i in indices):
            raise DimensionError(f"row index out of range for {self.rows} rows")
        return MeasurementMatrix(self.entries[list(indices), :], kind=self.kind, row_subset=indices)

    def scaled(self, factor: float) -> "MeasurementMatrix":
        return MeasurementMatrix(self.entries * factor, kind=MatrixKind.CUSTOM)


@dataclass(frozen=True)
class DimensionPlan:
    n: int
    k: int
    m: int
    rho: float
    undersampled: bool = False
    alpha: float = field(init=False)

    def __post_init__(self):
        if not (1 <= self.k < self.n and 1 <= self.m <= self.n):
            raise SparsityError(f"plan needs 1 <= k < n and 1 <= m <= n, got n={self.n} k={self.k} m={self.m}")
        if self.m <= self.k and not self.undersampled:
            raise SparsityError(f"plan needs k < m unless undersampled, got k={self.k} m={self.m}")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        object.__setattr__(self, "alpha", self.k / self.n)

    @classmethod
    def explicit(cls, n: int, k: int, m: int) -> "DimensionPlan":
        """A plan for a hand-picked m, with rho back-computed from m = rho k ln(n / k).

        m <= k is accepted and marks the plan undersampled; such plans are failure controls.
        """
        return cls(n=n, k=k, m=m, rho=m / (k * math.log(n / k)), undersampled=m <= k)


@dataclass(frozen=True)
class RipEstimate:
    """Sampled lower bound on delta_k; never a certificate."""

    delta_hat: float
    k: int
    num_samples: int
    subsets: tuple[tuple[int, ...], ...] = ()
    exhaustive: bool = False
    is_lower_bound: bool = field(default=True, init=False)


def plan_dimensions(n: int, k: int, rho: float = settings.DEFAULT_RHO) -> DimensionPlan:
    """Smallest m with m >= rho * k * ln(n / k), clamped to k + 1 <= m <= n.

    Example:
        >>> plan_dimensions(128, 4, 3.0).m
        42
    """
    if not 1 <= k < n:
        raise ValueError(f"plan_dimensions needs 1 <= k < n, got n={n} k={k}")
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    m = max(math.ceil(rho * k * math.log(n / k)), k + 1)
    if m > n:
        raise SparsityError(f"m={m} exceeds n={n}; sparsity k={k} too weak for rho={rho}")
    return DimensionPlan(n=n, k=k, m=m, rho=rho)


class LawKind(str, Enum):
    UNIFORM_INTEGER = "uniform-integer"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NonzeroLaw:
    """Distribution of the nonzero entries, optionally with a Bernoulli support.

    With support_probability set every coordinate is nonzero independently
    with that probability (the Example-1 model) and k is ignored.
    """

    kind: LawKind
    levels: int = 2
    variance: float = 1.0
    support_probability: float | None = None

    @classmethod
    def uniform_integer(cls, levels: int) -> "NonzeroLaw":
        return cls(LawKind.UNIFORM_INTEGER, levels=levels)

    @classmethod
    def gaussian(cls, variance: float = 1.0) -> "NonzeroLaw":
        return cls(LawKind.GAUSSIAN, variance=variance)

    @classmethod
    def bernoulli_support(cls, alpha: float, levels: int = 2) -> "NonzeroLaw":
        return cls(LawKind.UNIFORM_INTEGER, levels=levels, support_probability=alpha)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind is LawKind.UNIFORM_INTEGER:
            return rng.integers(1, self.levels + 1, size=size).astype(float)
        values = rng.normal(0.0, math.sqrt(self.variance), size=size)
        # a gaussian draw of exactly 0.0 would silently shrink the support
        return np.where(values == 0.0, np.finfo(float).tiny, values)


def generate_sparse_signal(n: int, k: int, nonzero_law: NonzeroLaw, seed: int) -> SparseVector:
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"generate_sparse_signal needs 0 <= k <= n, got n={n} k={k}")
    rng = derive_rng(seed, "sparse-signal")
    entries = np.zeros(n)
    if nonzero_law.support_probability is not None:
        mask = rng.random(n) < nonzero_law.support_probability
        entries[mask] = nonzero_law.draw(rng, int(mask.sum()))
    elif k > 0:
        support = rng.choice(n, size=k, replace=False)
        entries[support] = nonzero_law.draw(rng, k)
    return SparseVector(entries)


def generate_bernoulli_matrix(m: int, n: int, seed: int) -> MeasurementMatrix:
    if not 1 <= m <= n:
        raise ValueError(f"bernoulli matrix needs 1 <= m <= n, got {m} x {n}")
    rng = derive_rng(seed, "bernoulli-matrix")
    signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
    return MeasurementMatrix(signs / math.sqrt(m), kind=MatrixKind.BERNOULLI)


def generate_gaussian_matrix(m: int, n: int, seed: int) -> MeasurementMatrix:
    if not 1 <= m <= n:
        raise ValueError(f"gaussian matrix needs 1 <= m <= n, got {m} x {n}")
    rng = derive_rng(seed, "gaussian-matrix")
    return MeasurementMatrix(rng.normal(0.0, 1.0 / math.sqrt(m), size=(m, n)), kind=MatrixKind.GAUSSIAN)


def identity_matrix(n: int) -> MeasurementMatrix:
    return MeasurementMatrix(np.eye(n), kind=MatrixKind.IDENTITY)


def _as_array(x) -> np.ndarray:
    if isinstance(x, SparseVector):
        return x.entries
    return np.asarray(x, dtype=float)


def measure(phi: MeasurementMatrix, x) -> np.ndarray:
    """Y = Phi X."""
    values = _as_array(x)
    if values.shape != (phi.cols,):
        raise DimensionError(f"matrix has {phi.cols} columns but vector has shape {values.shape}")
    return phi.entries @ values


def _extreme_singular_values(entries: np.ndarray, subsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = entries.shape[0]
    k = subsets.shape[1]
    # (samples, m, k) stack of column submatrices
    stack = np.transpose(entries[:, subsets], (1, 0, 2))
    singular = np.linalg.svd(stack, compute_uv=False)
    sigma_max = singular[:, 0]
    sigma_min = singular[:, -1] if k <= m else np.zeros(len(subsets))
    return sigma_min, sigma_max


def estimate_rip_constant(
    phi: MeasurementMatrix,
    k: int,
    num_samples: int,
    seed: int,
    exhaustive_cap: int = settings.EXHAUSTIVE_CAP,
) -> RipEstimate:
    """Lower-bound delta_k from the extreme singular values of k-column submatrices.

    All C(n, k) subsets are enumerated when that count is at most
    exhaustive_cap; otherwise num_samples uniformly random subsets are used.
    """
    n = phi.cols
    if not 1 <= k <= n:
        raise ValueError(f"estimate_rip_constant needs 1 <= k <= n, got k={k} n={n}")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")

    exhaustive = math.comb(n, k) <= exhaustive_cap
    if exhaustive:
        subsets = list(combinations(range(n), k))
    else:
        rng = derive_rng(seed, "rip-subsets", k)
        subsets = [tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False))) for _ in range(num_samples)]

    delta_hat = 0.0
    iterator = iter(subsets)
    while batch := list(islice(iterator, _SVD_BATCH)):
        sigma_min, sigma_max = _extreme_singular_values(phi.entries, np.array(batch, dtype=int))
        deviation = np.maximum(sigma_max**2 - 1.0, 1.0 - sigma_min**2)
        delta_hat = max(delta_hat, float(deviation.max()))

    return RipEstimate(
        delta_hat=max(delta_hat, 0.0),
        k=k,
        num_samples=len(subsets),
        subsets=tuple(subsets),
        exhaustive=exhaustive,
    )


@dataclass(frozen=True)
class RecoveryCondition:
    estimates: dict[int, RipEstimate]
    value: float
    bound: float

    @property
    def holds(self) -> bool:
        # sampled deltas are lower bounds, so "holds" is evidence, not proof
        return self.value < self.bound


def _condition(phi, orders, weights, bound, num_samples, seed) -> RecoveryCondition:
    estimates = {}
    value = 0.0
    for order, weight in zip(orders, weights):
        order = min(order, phi.cols)
        estimate = estimates.get(order) or estimate_rip_constant(phi, order, num_samples, seed)
        estimates[order] = estimate
        value += weight * estimate.delta_hat
    return RecoveryCondition(estimates=estimates, value=value, bound=bound)


def noiseless_condition(phi: MeasurementMatrix, k: int, num_samples: int, seed: int) -> RecoveryCondition:
    """delta_k + delta_2k + delta_3k < 1 (exact recovery by basis pursuit)."""
    return _condition(phi, (k, 2 * k, 3 * k), (1.0, 1.0, 1.0), 1.0, num_samples, seed)


def noisy_condition(phi: MeasurementMatrix, k: int, num_samples: int, seed: int) -> RecoveryCondition:
    """delta_3k + 3 delta_4k < 2 (stable recovery by basis pursuit denoising)."""
    return _condition(phi, (3 * k, 4 * k), (1.0, 3.0), 2.0, num_samples, seed)


def binary_entropy(alpha: float) -> float:
    """H_b(alpha) in bits, with 0 log 0 = 0.

    Example:
        >>> binary_entropy(0.5)
        1.0
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"binary_entropy needs 0 <= alpha <= 1, got {alpha}")
    return float((entr(alpha) + entr(1.0 - alpha)) / math.log(2.0))


def write_matrix(path, values, fmt: str = "text") -> None:
    """Write a vector or matrix row-major: space separated text or CSV."""
    delimiter = {"text": " ", "csv": ","}[fmt]
    array = np.atleast_2d(_as_array(values.entries if isinstance(values, MeasurementMatrix) else values))
    np.savetxt(Path(path), array, fmt="%.17g", delimiter=delimiter)


def read_matrix(path, fmt: str = "text") -> np.ndarray:
    delimiter = {"text": None, "csv": ","}[fmt]
    return np.loadtxt(Path(path), delimiter=delimiter, ndmin=2)
