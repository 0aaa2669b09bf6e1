"""k-sparsely correlated sources and their entropy accounting.

The n sources observe mu_t = Phi mu'_t where the latent vector mu'_t is
sparse. Entropies are reported three ways: the closed-form accounting used
for rate tables, the exact entropy of the latent law, and a Monte-Carlo
plug-in estimate for small alphabets.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import entropy

from csnet.cs_core import (
    DimensionError,
    MeasurementMatrix,
    NonzeroLaw,
    SparseVector,
    binary_entropy,
    generate_bernoulli_matrix,
    generate_sparse_signal,
    measure,
)
from csnet.solver import CapExceededError
from csnet.utils import derive_rng, derive_seed

logger = logging.getLogger(__name__)

PLUGIN_MAX_SOURCES = 10
PLUGIN_MAX_SYMBOL_RATE = 3
PLUGIN_MIN_SAMPLES = 10_000

# Attempts at drawing a nonsingular transform before giving up
_TRANSFORM_ATTEMPTS = 1000


class SourceMode(str, Enum):
    FIXED_K = "fixed_k"
    BERNOULLI_SUPPORT = "bernoulli_support"


@dataclass(frozen=True, eq=False)
class SourceEnsemble:
    n: int
    k: int
    alpha: float
    transform: MeasurementMatrix
    symbol_rate: int
    mode: SourceMode = SourceMode.FIXED_K

    def __post_init__(self):
        object.__setattr__(self, "mode", SourceMode(self.mode))
        if self.transform.shape != (self.n, self.n):
            raise DimensionError(f"transform must be {self.n} x {self.n}, got {self.transform.shape}")
        if np.linalg.matrix_rank(self.transform.entries) < self.n:
            raise ValueError("transform must be nonsingular")
        if self.symbol_rate < 1:
            raise ValueError(f"symbol rate must be >= 1, got {self.symbol_rate}")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"k must be in [0, n], got k={self.k} n={self.n}")
        degenerate = self.mode is SourceMode.FIXED_K and self.k == 0 and self.alpha == 0.0
        if not degenerate and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")

    @property
    def levels(self) -> int:
        return 2**self.symbol_rate

    @property
    def nonzero_law(self) -> NonzeroLaw:
        if self.mode is SourceMode.BERNOULLI_SUPPORT:
            return NonzeroLaw.bernoulli_support(self.alpha, self.levels)
        return NonzeroLaw.uniform_integer(self.levels)


def make_ensemble(
    n: int,
    k: int,
    symbol_rate: int,
    mode: SourceMode | str,
    seed: int,
    alpha: float | None = None,
) -> SourceEnsemble:
    """Build an ensemble with an n x n +-1/sqrt(n) transform, redrawn until nonsingular.

    alpha defaults to k / n; in bernoulli_support mode it is the per
    coordinate support probability and k only feeds the rate accounting.
    """
    mode = SourceMode(mode)
    if alpha is None:
        alpha = k / n
    for attempt in range(_TRANSFORM_ATTEMPTS):
        transform = generate_bernoulli_matrix(n, n, derive_seed(seed, "transform", attempt))
        if np.linalg.matrix_rank(transform.entries) == n:
            if attempt:
                logger.debug("transform nonsingular after %d redraws", attempt)
            return SourceEnsemble(n=n, k=k, alpha=alpha, transform=transform, symbol_rate=symbol_rate, mode=mode)
    raise ValueError(f"no nonsingular {n} x {n} transform in {_TRANSFORM_ATTEMPTS} draws")


@dataclass(frozen=True, eq=False)
class MessagePair:
    latent: SparseVector
    observed: np.ndarray
    time_index: int


def sample_messages(ens: SourceEnsemble, t: int, seed: int) -> MessagePair:
    """Draw mu'_t from the ensemble law and observe mu_t = Phi mu'_t."""
    latent = generate_sparse_signal(ens.n, ens.k, ens.nonzero_law, derive_seed(seed, "messages", t))
    return MessagePair(latent=latent, observed=measure(ens.transform, latent), time_index=t)


@dataclass(frozen=True)
class EntropyReport:
    """Entropies in bits for one ensemble and active-set size m."""

    m: int
    joint: float
    joint_approx: float
    joint_exact: float
    per_source: float
    subset_m: float
    sum_active: float
    sum_all: float

    def ordering_violations(self, tol: float = 1e-9) -> list[str]:
        violations = []
        if self.joint > self.sum_all + tol:
            violations.append(f"joint {self.joint:.4f} > sum_all {self.sum_all:.4f}")
        if abs(self.subset_m - self.joint) > tol:
            violations.append(f"subset_m {self.subset_m:.4f} != joint {self.joint:.4f}")
        if self.subset_m > self.sum_active + tol:
            violations.append(f"subset_m {self.subset_m:.4f} > sum_active {self.sum_active:.4f}")
        if self.sum_active > self.sum_all + tol:
            violations.append(f"sum_active {self.sum_active:.4f} > sum_all {self.sum_all:.4f}")
        return violations


def per_source_entropy(ens: SourceEnsemble) -> float:
    """R + log2(k) / 2, the large-n single-source entropy used for rate tables."""
    if ens.k == 0:
        return 0.0
    return ens.symbol_rate + 0.5 * math.log2(ens.k)


def source_entropies(ens: SourceEnsemble) -> np.ndarray:
    """Per-source entropies; all sources share one value."""
    return np.full(ens.n, per_source_entropy(ens))


def exact_latent_entropy(ens: SourceEnsemble) -> float:
    """Exact entropy of mu' in bits.

    Example:
        >>> round(exact_latent_entropy(make_ensemble(1, 1, 1, "bernoulli_support", 0, alpha=0.5)), 6)
        1.5
    """
    if ens.mode is SourceMode.BERNOULLI_SUPPORT:
        return ens.n * (binary_entropy(ens.alpha) + ens.alpha * ens.symbol_rate)
    return math.log2(math.comb(ens.n, ens.k)) + ens.k * ens.symbol_rate


def analytic_entropies(ens: SourceEnsemble, m: int) -> EntropyReport:
    if not 1 <= m <= ens.n:
        raise ValueError(f"analytic_entropies needs 1 <= m <= n, got m={m} n={ens.n}")
    spread = ens.n * binary_entropy(ens.alpha)
    joint = spread + ens.k * (ens.symbol_rate + 1)
    per_source = per_source_entropy(ens)
    report = EntropyReport(
        m=m,
        joint=joint,
        joint_approx=spread + ens.k * ens.symbol_rate,
        joint_exact=exact_latent_entropy(ens),
        per_source=per_source,
        # m well-chosen observations determine all n
        subset_m=joint,
        sum_active=m * per_source,
        sum_all=ens.n * per_source,
    )
    for violation in report.ordering_violations():
        logger.warning("entropy ordering violated at n=%d k=%d m=%d: %s", ens.n, ens.k, m, violation)
    return report


def _check_plugin_scale(ens: SourceEnsemble, num_samples: int):
    if ens.n > PLUGIN_MAX_SOURCES or ens.symbol_rate > PLUGIN_MAX_SYMBOL_RATE:
        raise CapExceededError(
            f"plug-in entropy limited to n <= {PLUGIN_MAX_SOURCES} and R <= {PLUGIN_MAX_SYMBOL_RATE}, "
            f"got n={ens.n} R={ens.symbol_rate}"
        )
    if num_samples < PLUGIN_MIN_SAMPLES:
        raise ValueError(f"plug-in entropy needs at least {PLUGIN_MIN_SAMPLES} samples, got {num_samples}")


def _draw_latents(ens: SourceEnsemble, rng: np.random.Generator, count: int) -> np.ndarray:
    """count x n latent vectors from the ensemble law, vectorised."""
    values = rng.integers(1, ens.levels + 1, size=(count, ens.n))
    if ens.mode is SourceMode.BERNOULLI_SUPPORT:
        mask = rng.random((count, ens.n)) < ens.alpha
    else:
        ranks = rng.random((count, ens.n)).argsort(axis=1).argsort(axis=1)
        mask = ranks < ens.k
    return np.where(mask, values, 0)


def _encode_rows(latents: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(latents.shape[1], dtype=np.int64)
    return latents.astype(np.int64) @ weights


def _plugin_bits(keys: np.ndarray) -> float:
    _, counts = np.unique(keys, return_counts=True)
    return float(entropy(counts, base=2))


def plugin_joint_entropy(ens: SourceEnsemble, num_samples: int, seed: int) -> float:
    """Plug-in entropy of the latent vector from num_samples draws.

    The observed vector is a fixed invertible image of the latent one, so
    both carry the same entropy.
    """
    _check_plugin_scale(ens, num_samples)
    latents = _draw_latents(ens, derive_rng(seed, "plugin-entropy"), num_samples)
    return _plugin_bits(_encode_rows(latents, ens.levels + 1))


@dataclass(frozen=True)
class PluginEstimate:
    bits: float
    standard_error: float
    num_samples: int
    batches: int


def plugin_entropy_with_error(ens: SourceEnsemble, num_samples: int, seed: int, batches: int = 10) -> PluginEstimate:
    """Plug-in estimate over all samples plus a batch-means standard error."""
    if batches < 2:
        raise ValueError("batches must be >= 2")
    _check_plugin_scale(ens, num_samples)
    keys = _encode_rows(_draw_latents(ens, derive_rng(seed, "plugin-entropy"), num_samples), ens.levels + 1)
    batch_bits = [_plugin_bits(chunk) for chunk in np.array_split(keys, batches)]
    return PluginEstimate(
        bits=_plugin_bits(keys),
        standard_error=float(np.std(batch_bits, ddof=1) / math.sqrt(batches)),
        num_samples=num_samples,
        batches=batches,
    )
