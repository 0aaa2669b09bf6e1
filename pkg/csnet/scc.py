"""Sparse channel coding for the high-SNR AWGN channel.

A message picks a k-sparse vector X (outer layer: its support pattern;
inner layer: gaussian values on the support) and the channel input is
W = Phi X. The receiver denoises with basis pursuit, thresholds the
estimate to a support pattern, and runs maximum likelihood only among
codewords sharing that pattern.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.stats import binomtest, norm

from csnet import settings
from csnet.cs_core import (
    DimensionError,
    DimensionPlan,
    MeasurementMatrix,
    SparseVector,
    binary_entropy,
    estimate_rip_constant,
    generate_bernoulli_matrix,
    noisy_condition,
)
from csnet.sdc import RipConditionError
from csnet.solver import CapExceededError, DenoiseConfig, RecoveryResult, basis_pursuit_denoise
from csnet.utils import derive_rng, derive_seed

logger = logging.getLogger(__name__)

HIGH_SNR = 100.0


@dataclass(frozen=True)
class ChannelConfig:
    power: float
    noise_power: float

    def __post_init__(self):
        if self.power <= 0 or self.noise_power <= 0:
            raise ValueError(f"power and noise power must be > 0, got P={self.power} N={self.noise_power}")

    @classmethod
    def from_snr_db(cls, snr_db: float, power: float = 1.0) -> "ChannelConfig":
        return cls(power=power, noise_power=power / 10 ** (snr_db / 10))

    @property
    def snr(self) -> float:
        return self.power / self.noise_power

    @property
    def high_snr(self) -> bool:
        return self.snr >= HIGH_SNR


def capacity(ch: ChannelConfig) -> float:
    """High-SNR capacity 0.5 log2(P / N) in bits per symbol.

    Example:
        >>> capacity(ChannelConfig(4.0, 1.0))
        1.0
    """
    return 0.5 * math.log2(ch.snr)


@dataclass(frozen=True)
class RateTerms:
    inner: float
    outer: float
    power_loss: float

    @property
    def total(self) -> float:
        return self.inner + self.outer + self.power_loss


def achievable_rate_terms(k: int, m: int, n: int, alpha: float, beta: float, delta_k: float, C: float) -> RateTerms:
    """Inner-code, outer-code and power-constraint terms of the achievable rate."""
    return RateTerms(
        inner=(k / m) * C,
        outer=(n / m) * binary_entropy(alpha),
        power_loss=(k / (2 * m)) * math.log2(1.0 / (beta * (1.0 + delta_k))),
    )


def achievable_rate(k: int, m: int, n: int, alpha: float, beta: float, delta_k: float, C: float) -> float:
    return achievable_rate_terms(k, m, n, alpha, beta, delta_k, C).total


def approx_rate(alpha: float, C: float, base: float = math.e, rho: float = 1.0) -> float:
    """(C + H_b(alpha) / alpha) / (rho log(1 / alpha)) once m = rho k ln(n / k).

    base must match the logarithm used to size m; natural by default.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"approx_rate needs 0 < alpha < 1, got {alpha}")
    log_inverse = math.log(1.0 / alpha, base)
    return C / (rho * log_inverse) + binary_entropy(alpha) / (rho * alpha * log_inverse)


def timesharing_rate(k: int, m: int, C: float) -> float:
    """Rate of plain time sharing over k of m channel uses."""
    return (k / m) * C


def pattern_probability(n: int, alpha: float) -> float:
    """Probability that an independent pattern equals a given one of weight alpha n."""
    k = round(alpha * n)
    return alpha**k * (1.0 - alpha) ** (n - k)


def pairwise_error_bound(beta: float, delta_k: float, ch: ChannelConfig) -> float:
    """Random-coding error between two codewords sharing one support pattern."""
    return 1.0 / (1.0 + ch.snr / (beta * (1.0 + delta_k)))


@dataclass(frozen=True)
class ExponentBound:
    exponent: float
    bound: float


def error_exponent_bound(n: int, alpha: float, beta: float, delta_k: float, ch: ChannelConfig) -> ExponentBound:
    """Exponent n (H_b(alpha) + alpha/2 log2(P / (N beta (1 + delta_k)))) and 2^-exponent."""
    exponent = n * (binary_entropy(alpha) + 0.5 * alpha * math.log2(ch.snr / (beta * (1.0 + delta_k))))
    return ExponentBound(exponent=exponent, bound=2.0**-exponent)


def union_error_bound(
    m: int, rate: float, k: int, n: int, alpha: float, beta: float, delta_k: float, C: float
) -> float:
    """2^{m (R - achievable rate)}; above 1 it bounds nothing."""
    return 2.0 ** (m * (rate - achievable_rate(k, m, n, alpha, beta, delta_k, C)))


@dataclass(frozen=True, eq=False)
class SupportPattern:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool).copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_support(cls, n: int, support) -> "SupportPattern":
        bits = np.zeros(n, dtype=bool)
        bits[list(support)] = True
        return cls(bits)

    @property
    def weight(self) -> int:
        return int(self.bits.sum())

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.bits))

    def hamming(self, other: "SupportPattern") -> int:
        return int(np.count_nonzero(self.bits != other.bits))

    def __eq__(self, other):
        return isinstance(other, SupportPattern) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())


@dataclass(frozen=True, eq=False)
class SccCodebook:
    plan: DimensionPlan
    channel: ChannelConfig
    rate: float
    nominal_rate: float
    phi: MeasurementMatrix
    delta_k: float
    supports: np.ndarray
    values: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.supports.shape[0]

    def codeword(self, i: int) -> SparseVector:
        return SparseVector.from_support(self.plan.n, self.supports[i], self.values[i])

    def pattern(self, i: int) -> SupportPattern:
        return SupportPattern.from_support(self.plan.n, self.supports[i])

    @cached_property
    def pattern_matrix(self) -> np.ndarray:
        bits = np.zeros((self.size, self.plan.n), dtype=bool)
        np.put_along_axis(bits, self.supports, True, axis=1)
        return bits

    @cached_property
    def transmitted(self) -> np.ndarray:
        """W_i = Phi_S X_i for every codeword, one per row."""
        columns = self.phi.entries[:, self.supports]
        return np.einsum("mck,ck->cm", columns, self.values)

    @cached_property
    def powers(self) -> np.ndarray:
        return (self.transmitted**2).sum(axis=1) / self.plan.m

    def violates_power(self, i: int) -> bool:
        return bool(self.powers[i] > self.channel.power)

    @property
    def power_violation_rate(self) -> float:
        return float(np.mean(self.powers > self.channel.power))


def codebook_bits(m: int, rate: float) -> int:
    """ceil(m R), robust to m R landing a hair above an integer."""
    return max(0, math.ceil(m * rate - 1e-9))


def codebook_matrix(plan: DimensionPlan, seed: int) -> MeasurementMatrix:
    return generate_bernoulli_matrix(plan.m, plan.n, derive_seed(seed, "scc-phi"))


def codebook_delta(phi: MeasurementMatrix, k: int, seed: int, rip_samples: int = settings.DEFAULT_RIP_SAMPLES) -> float:
    """Sampled delta_k used to scale the codeword variance."""
    return estimate_rip_constant(phi, k, rip_samples, derive_seed(seed, "scc-rip")).delta_hat


def build_codebook(
    plan: DimensionPlan,
    ch: ChannelConfig,
    rate: float,
    seed: int,
    rip_samples: int = settings.DEFAULT_RIP_SAMPLES,
    strict_rip: bool = False,
    max_codewords: int = settings.MAX_CODEWORDS,
) -> SccCodebook:
    """Random k-sparse codebook of 2^ceil(mR) codewords over a Bernoulli Phi.

    Nonzeros are gaussian with variance m P / (k (1 + delta_k)) so that
    W = Phi X meets the power constraint on average.
    """
    n, k, m = plan.n, plan.k, plan.m
    bits = codebook_bits(m, rate)
    count = 2**bits
    if count > max_codewords:
        raise CapExceededError(f"2^{bits} codewords exceed the cap {max_codewords}")

    phi = codebook_matrix(plan, seed)
    delta_k = codebook_delta(phi, k, seed, rip_samples)
    regime = noisy_condition(phi, k, rip_samples, derive_seed(seed, "scc-regime"))
    if not regime.holds:
        message = f"sampled delta_3k + 3 delta_4k = {regime.value:.3f} is not below 2"
        if strict_rip:
            raise RipConditionError(message)
        logger.warning(message)

    rng = derive_rng(seed, "scc-codewords")
    supports = np.sort(rng.random((count, n)).argsort(axis=1)[:, :k], axis=1)
    scale = math.sqrt(m * ch.power / (k * (1.0 + delta_k)))
    values = rng.normal(0.0, scale, size=(count, k))
    logger.debug("codebook: %d codewords, rate %.4f, delta_k %.3f", count, bits / m, delta_k)
    return SccCodebook(
        plan=plan,
        channel=ch,
        rate=bits / m,
        nominal_rate=rate,
        phi=phi,
        delta_k=delta_k,
        supports=supports,
        values=values,
        seed=seed,
    )


def encode(cb: SccCodebook, i: int) -> np.ndarray:
    """Channel input of message i; power violations are counted, not rejected."""
    if not 0 <= i < cb.size:
        raise IndexError(f"message {i} outside [0, {cb.size})")
    if cb.violates_power(i):
        logger.debug("codeword %d power %.4f exceeds P=%.4f", i, cb.powers[i], cb.channel.power)
    return cb.transmitted[i].copy()


def encode_vector(cb: SccCodebook, x) -> np.ndarray:
    values = x.entries if isinstance(x, SparseVector) else np.asarray(x, dtype=float)
    if values.shape != (cb.plan.n,):
        raise DimensionError(f"codebook vectors have length {cb.plan.n}, got shape {values.shape}")
    return cb.phi.entries @ values


def awgn(w, ch: ChannelConfig, seed: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w + derive_rng(seed, "awgn").normal(0.0, math.sqrt(ch.noise_power), size=w.shape)


@dataclass(frozen=True)
class DecoderConfig:
    tau: float
    noise_power: float
    beta: float = settings.DEFAULT_BETA
    max_iterations: int = 10_000
    convergence_tol: float = 1e-4

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.noise_power <= 0:
            raise ValueError("noise power must be > 0")

    @classmethod
    def default(cls, ch: ChannelConfig, m: int, n: int, beta: float = settings.DEFAULT_BETA, **kwargs) -> "DecoderConfig":
        """tau = 4 sqrt(beta m N / n), four spread-out noise deviations."""
        tau = settings.TAU_NOISE_MULTIPLE * math.sqrt(beta * m * ch.noise_power / n)
        return cls(tau=tau, noise_power=ch.noise_power, beta=beta, **kwargs)

    def epsilon(self, m: int) -> float:
        return math.sqrt(m * self.noise_power)


def cs_denoise(cb: SccCodebook, y, dec: DecoderConfig) -> RecoveryResult:
    cfg = DenoiseConfig(
        epsilon=dec.epsilon(cb.plan.m),
        max_iterations=dec.max_iterations,
        convergence_tol=dec.convergence_tol,
    )
    return basis_pursuit_denoise(cb.phi, y, cfg)


def detect_support(x, tau: float) -> SupportPattern:
    """Coordinates with |x_j| >= tau; values are signed so both tails count."""
    values = x.entries if isinstance(x, SparseVector) else np.asarray(x, dtype=float)
    return SupportPattern(np.abs(values) >= tau)


@dataclass(frozen=True)
class MlChoice:
    index: int
    candidates: int
    fallback: bool
    distance: int


def ml_decode(cb: SccCodebook, y, pattern: SupportPattern) -> MlChoice:
    """Nearest codeword among those with the detected pattern.

    With no exact pattern match the search widens to every codeword at the
    minimum Hamming distance.
    """
    distances = np.count_nonzero(cb.pattern_matrix != pattern.bits, axis=1)
    nearest = int(distances.min())
    candidates = np.flatnonzero(distances == nearest)
    residuals = ((cb.transmitted[candidates] - np.asarray(y, dtype=float)) ** 2).sum(axis=1)
    return MlChoice(
        index=int(candidates[int(np.argmin(residuals))]),
        candidates=int(candidates.size),
        fallback=nearest > 0,
        distance=nearest,
    )


@dataclass(frozen=True, eq=False)
class DecodeDiagnostics:
    estimate: RecoveryResult
    pattern: SupportPattern
    choice: MlChoice
    residual_ok: bool
    failed_stage: str | None = None


def decode(cb: SccCodebook, y, dec: DecoderConfig, truth: int | None = None) -> tuple[int, DecodeDiagnostics]:
    """CS denoise, threshold to a pattern, then ML within the pattern.

    With truth given, failed_stage names the first stage that went wrong:
    'support' for a pattern mismatch, 'ml' for a wrong codeword on the
    right pattern.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (cb.plan.m,):
        raise DimensionError(f"received vector must have length {cb.plan.m}, got shape {y.shape}")
    estimate = cs_denoise(cb, y, dec)
    pattern = detect_support(estimate.x, dec.tau)
    choice = ml_decode(cb, y, pattern)

    m = cb.plan.m
    residual_ok = estimate.residual_norm**2 / m <= dec.noise_power * (1.0 + dec.convergence_tol) + 1e-12
    failed_stage = None
    if truth is not None:
        if pattern != cb.pattern(truth):
            failed_stage = "support" if choice.index != truth else None
        elif choice.index != truth:
            failed_stage = "ml"
    return choice.index, DecodeDiagnostics(estimate, pattern, choice, residual_ok, failed_stage)


@dataclass(frozen=True)
class EmpiricalSupportErrors:
    """Support detection errors measured over decoded trials."""

    zero: float  # false alarms per zero coordinate
    nonzero: float  # misses per nonzero coordinate
    pattern: float
    trials: int


@dataclass(frozen=True)
class SupportErrorReport:
    """Per-coordinate and whole-pattern support detection errors.

    The verbatim_* values follow the printed CDF expressions, which are not
    always probabilities; corrected_* use two-sided gaussian tails.
    """

    verbatim_zero: float
    verbatim_nonzero: float
    verbatim_pattern: float
    corrected_zero: float
    corrected_nonzero: float
    corrected_pattern: float
    flags: tuple[str, ...] = ()
    empirical: EmpiricalSupportErrors | None = None

    def corrected_gaps(self) -> dict[str, float] | None:
        """corrected_* minus the measured rates; None without a measurement."""
        if self.empirical is None:
            return None
        return {
            "zero": self.corrected_zero - self.empirical.zero,
            "nonzero": self.corrected_nonzero - self.empirical.nonzero,
            "pattern": self.corrected_pattern - self.empirical.pattern,
        }


def support_error_analytic(
    dec: DecoderConfig,
    ch: ChannelConfig,
    m: int,
    n: int,
    alpha: float,
    beta: float | None = None,
    empirical: EmpiricalSupportErrors | None = None,
) -> SupportErrorReport:
    """Closed-form support detection errors, with measured rates attached when given.

    Pass monte_carlo_pe(...).support as empirical to compare the model
    against the same decoder on the same codebook.
    """
    beta = dec.beta if beta is None else beta
    spread = beta * m * ch.noise_power / n
    sigma_zero = math.sqrt(spread)
    sigma_nonzero = math.sqrt(ch.power + spread)
    zeros, nonzeros = n * (1.0 - alpha), n * alpha

    verbatim_zero = float(norm.cdf(dec.tau / sigma_zero))
    verbatim_nonzero = float(1.0 - 2.0 * norm.cdf(dec.tau / sigma_nonzero))
    verbatim_pattern = 1.0 - (1.0 - verbatim_zero) ** zeros * (2.0 * norm.cdf(dec.tau / sigma_nonzero)) ** nonzeros

    corrected_zero = float(2.0 * norm.sf(dec.tau / sigma_zero))
    corrected_nonzero = float(2.0 * norm.cdf(dec.tau / sigma_nonzero) - 1.0)
    corrected_pattern = 1.0 - (1.0 - corrected_zero) ** zeros * (1.0 - corrected_nonzero) ** nonzeros

    flags = tuple(
        f"{name} = {value:.6g} outside [0, 1]"
        for name, value in (
            ("verbatim_zero", verbatim_zero),
            ("verbatim_nonzero", verbatim_nonzero),
            ("verbatim_pattern", verbatim_pattern),
        )
        if not 0.0 <= value <= 1.0
    )
    for flag in flags:
        logger.warning("support error formula: %s", flag)
    return SupportErrorReport(
        verbatim_zero=verbatim_zero,
        verbatim_nonzero=verbatim_nonzero,
        verbatim_pattern=float(verbatim_pattern),
        corrected_zero=corrected_zero,
        corrected_nonzero=corrected_nonzero,
        corrected_pattern=float(corrected_pattern),
        flags=flags,
        empirical=empirical,
    )


@dataclass(frozen=True)
class TrialOutcome:
    message: int
    decoded: int
    power_violation: bool
    failed_stage: str | None
    cross_pattern: bool
    residual_ok: bool
    false_alarms: int
    misses: int


def _trial(cb: SccCodebook, ch: ChannelConfig, dec: DecoderConfig, seed: int, trial: int) -> TrialOutcome:
    message = int(derive_rng(seed, "message", trial).integers(cb.size))
    y = awgn(encode(cb, message), ch, derive_seed(seed, "noise", trial))
    decoded, diagnostics = decode(cb, y, dec, truth=message)
    detected = diagnostics.pattern.bits
    truth = cb.pattern_matrix[message]
    return TrialOutcome(
        message=message,
        decoded=decoded,
        power_violation=cb.violates_power(message),
        failed_stage=diagnostics.failed_stage,
        cross_pattern=decoded != message and not np.array_equal(cb.pattern_matrix[decoded], cb.pattern_matrix[message]),
        residual_ok=diagnostics.residual_ok,
        false_alarms=int(np.count_nonzero(detected & ~truth)),
        misses=int(np.count_nonzero(~detected & truth)),
    )


@dataclass(frozen=True)
class ErrorEstimate:
    pe: float
    ci_low: float
    ci_high: float
    trials: int
    errors: int
    power_violations: int = 0
    support_failures: int = 0
    ml_failures: int = 0
    cross_pattern_errors: int = 0
    residual_violations: int = 0
    support: EmpiricalSupportErrors | None = None
    extras: dict = field(default_factory=dict)


def monte_carlo_pe(
    cb: SccCodebook, ch: ChannelConfig, dec: DecoderConfig, trials: int, seed: int, threads: int = 1
) -> ErrorEstimate:
    """Message error rate with an exact 95% binomial interval and stage attribution.

    The same trials also give the measured support detection errors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    # fill the cached arrays once, before threads race to build them
    cb.transmitted, cb.pattern_matrix, cb.powers
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        outcomes = list(executor.map(lambda trial: _trial(cb, ch, dec, seed, trial), range(trials)))

    errors = sum(outcome.decoded != outcome.message for outcome in outcomes)
    interval = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="exact")
    n, k = cb.plan.n, cb.plan.k
    support = EmpiricalSupportErrors(
        zero=sum(outcome.false_alarms for outcome in outcomes) / (trials * (n - k)),
        nonzero=sum(outcome.misses for outcome in outcomes) / (trials * k),
        pattern=sum(outcome.false_alarms + outcome.misses > 0 for outcome in outcomes) / trials,
        trials=trials,
    )
    return ErrorEstimate(
        pe=errors / trials,
        ci_low=float(interval.low),
        ci_high=float(interval.high),
        trials=trials,
        errors=errors,
        power_violations=sum(outcome.power_violation for outcome in outcomes),
        support_failures=sum(outcome.failed_stage == "support" for outcome in outcomes),
        ml_failures=sum(outcome.failed_stage == "ml" for outcome in outcomes),
        cross_pattern_errors=sum(outcome.cross_pattern for outcome in outcomes),
        residual_violations=sum(not outcome.residual_ok for outcome in outcomes),
        support=support,
    )


def calibrate_beta(cb: SccCodebook, ch: ChannelConfig, dec: DecoderConfig, trials: int, seed: int) -> float:
    """95th percentile of ||X - X~||_2 / epsilon over random messages."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    epsilon = dec.epsilon(cb.plan.m)
    ratios = []
    for trial in range(trials):
        message = int(derive_rng(seed, "calibrate-message", trial).integers(cb.size))
        y = awgn(encode(cb, message), ch, derive_seed(seed, "calibrate-noise", trial))
        estimate = cs_denoise(cb, y, dec)
        ratios.append(np.linalg.norm(cb.codeword(message).entries - estimate.x) / epsilon)
    return float(np.percentile(ratios, 95))
