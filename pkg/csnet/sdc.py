"""Sparse distributed compression over a depth-one tree.

m of the n sources transmit their observations with independent coding;
the receiver recovers the sparse latent vector with basis pursuit and
re-derives every source's message from it.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from csnet import settings
from csnet.cs_core import MeasurementMatrix, estimate_rip_constant
from csnet.solver import RecoveryResult, basis_pursuit
from csnet.source_model import (
    MessagePair,
    SourceEnsemble,
    SourceMode,
    analytic_entropies,
    sample_messages,
    source_entropies,
)
from csnet.utils import derive_rng, derive_seed

logger = logging.getLogger(__name__)

# Redraws allowed before a Bernoulli activation outside the window is accepted anyway
_ACTIVATION_ATTEMPTS = 1000


class RipConditionError(ValueError):
    """Raised in strict mode when a sampled RIP constant misses its bound."""


class SchemeKind(str, Enum):
    SDCIC = "sdcic"
    SLEPIAN_WOLF = "slepian_wolf"
    SDC_PLUS_SW = "sdc_plus_sw"
    NAIVE = "naive"


class ActivationPolicy(str, Enum):
    BERNOULLI_GAMMA = "bernoulli_gamma"
    LOWEST_ENTROPY = "lowest_entropy"
    FIXED = "fixed"


@dataclass(frozen=True)
class ActiveSet:
    indices: tuple[int, ...]
    policy: ActivationPolicy
    gamma: float
    pre_trim_size: int | None = None

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise ValueError("active indices must be distinct")
        if indices and min(indices) < 0:
            raise ValueError("active indices must be non-negative")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "policy", ActivationPolicy(self.policy))

    @property
    def m(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SchemeReport:
    scheme: SchemeKind
    min_cut_rate: float
    decode_op_count: int | None = None
    success: bool | None = None
    trial_seed: int | None = None
    receiver: int | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.min_cut_rate < 0:
            raise ValueError(f"min-cut rate must be >= 0, got {self.min_cut_rate}")


def _bernoulli_activation(n: int, m: int, seed: int) -> tuple[list[int], int]:
    rng = derive_rng(seed, "activation")
    gamma = m / n
    window = math.ceil(math.sqrt(n))
    for _ in range(_ACTIVATION_ATTEMPTS):
        drawn = np.flatnonzero(rng.random(n) < gamma)
        if abs(drawn.size - m) <= window:
            break
    else:
        logger.warning("bernoulli activation stayed outside m +- %d for %d draws", window, _ACTIVATION_ATTEMPTS)

    pre_trim_size = int(drawn.size)
    if drawn.size > m:
        chosen = rng.choice(drawn, size=m, replace=False)
    else:
        idle = np.setdiff1d(np.arange(n), drawn)
        chosen = np.concatenate([drawn, rng.choice(idle, size=m - drawn.size, replace=False)])
    return sorted(int(i) for i in chosen), pre_trim_size


def select_active_sources(
    ens: SourceEnsemble,
    m: int,
    policy: ActivationPolicy | str,
    entropies=None,
    seed: int = 0,
    indices=None,
) -> ActiveSet:
    """Pick exactly m transmitting sources.

    bernoulli_gamma activates each source with probability m / n, redraws
    until the count is within ceil(sqrt(n)) of m and then trims or pads at
    random; lowest_entropy takes the m smallest entropies, ties by index;
    fixed uses the caller's indices.
    """
    policy = ActivationPolicy(policy)
    n = ens.n
    if not 1 <= m <= n:
        raise ValueError(f"active set needs 1 <= m <= n, got m={m} n={n}")
    gamma = m / n

    if policy is ActivationPolicy.FIXED:
        if indices is None or len(indices) != m:
            raise ValueError("fixed policy needs exactly m caller-supplied indices")
        if any(not 0 <= int(i) < n for i in indices):
            raise ValueError(f"active index out of range for n={n}")
        return ActiveSet(tuple(indices), policy, gamma)

    if m == n:
        return ActiveSet(tuple(range(n)), policy, gamma, pre_trim_size=n)

    if policy is ActivationPolicy.LOWEST_ENTROPY:
        entropies = source_entropies(ens) if entropies is None else np.asarray(entropies, dtype=float)
        if entropies.shape != (n,):
            raise ValueError(f"need {n} entropies, got shape {entropies.shape}")
        chosen = np.argsort(entropies, kind="stable")[:m]
        return ActiveSet(tuple(sorted(int(i) for i in chosen)), policy, gamma)

    chosen, pre_trim_size = _bernoulli_activation(n, m, seed)
    return ActiveSet(tuple(chosen), policy, gamma, pre_trim_size=pre_trim_size)


def rate_table(ens: SourceEnsemble, m: int) -> list[SchemeReport]:
    """Minimum min-cut rate of each compression scheme, in bits."""
    report = analytic_entropies(ens, m)
    return [
        SchemeReport(SchemeKind.SDCIC, report.sum_active),
        SchemeReport(SchemeKind.SLEPIAN_WOLF, report.joint),
        SchemeReport(SchemeKind.SDC_PLUS_SW, report.subset_m),
        SchemeReport(SchemeKind.NAIVE, report.sum_all),
    ]


def rate_ordering_violations(reports, tol: float = 1e-9) -> list[str]:
    """Relations SW = SDC+SW <= SDCIC <= Naive that the given rates break."""
    rates = {report.scheme: report.min_cut_rate for report in reports}
    sw = rates[SchemeKind.SLEPIAN_WOLF]
    sdc_sw = rates[SchemeKind.SDC_PLUS_SW]
    sdcic = rates[SchemeKind.SDCIC]
    naive = rates[SchemeKind.NAIVE]
    violations = []
    if abs(sw - sdc_sw) > tol:
        violations.append(f"slepian_wolf {sw:.4f} != sdc_plus_sw {sdc_sw:.4f}")
    if sdc_sw > sdcic + tol:
        violations.append(f"sdc_plus_sw {sdc_sw:.4f} > sdcic {sdcic:.4f}")
    if sdcic > naive + tol:
        violations.append(f"sdcic {sdcic:.4f} > naive {naive:.4f}")
    return violations


@dataclass(frozen=True, eq=False)
class Transport:
    """The m active observations as delivered to the receiver."""

    values: np.ndarray
    bits: float
    op_count: int


def transport_active(ens: SourceEnsemble, msg: MessagePair, active: ActiveSet) -> Transport:
    """Lossless independent coding of mu_{t,S}, charged at the sources' entropies."""
    indices = list(active.indices)
    return Transport(
        values=msg.observed[indices].copy(),
        bits=float(source_entropies(ens)[indices].sum()),
        op_count=active.m,
    )


def active_transform(ens: SourceEnsemble, active: ActiveSet) -> MeasurementMatrix:
    return ens.transform.select_rows(active.indices)


def cs_decode(ens: SourceEnsemble, active: ActiveSet, measurements) -> tuple[RecoveryResult, np.ndarray]:
    """Recover mu'_t from mu_{t,S} = Phi_S mu'_t and rebuild every source's mu_t."""
    result = basis_pursuit(active_transform(ens, active), measurements)
    return result, ens.transform.entries @ result.x


def check_active_rip(
    ens: SourceEnsemble,
    active: ActiveSet,
    seed: int,
    num_samples: int = settings.DEFAULT_RIP_SAMPLES,
    strict: bool = False,
) -> float | None:
    """Sampled delta_2k of Phi_S rescaled to unit-norm columns; None when 2k > m."""
    order = 2 * ens.k
    if order < 1 or order > active.m:
        return None
    phi = active_transform(ens, active).scaled(math.sqrt(ens.n / active.m))
    delta = estimate_rip_constant(phi, order, num_samples, derive_seed(seed, "active-rip")).delta_hat
    if delta >= 1.0:
        message = f"active transform delta_{order} estimate {delta:.3f} >= 1"
        if strict:
            raise RipConditionError(message)
        logger.warning(message)
    return delta


def _matches(recovered, expected) -> bool:
    return bool(np.allclose(recovered, expected, rtol=0, atol=settings.RECOVERY_TOLERANCE))


def sdcic_roundtrip(
    ens: SourceEnsemble,
    active: ActiveSet,
    t: int,
    seed: int,
    rip_samples: int = settings.DEFAULT_RIP_SAMPLES,
    strict_rip: bool = False,
) -> SchemeReport:
    """Transport the active observations, then basis-pursuit decode all n messages."""
    delta = check_active_rip(ens, active, seed, rip_samples, strict_rip) if rip_samples else None
    msg = sample_messages(ens, t, seed)
    transport = transport_active(ens, msg, active)
    result, recovered = cs_decode(ens, active, transport.values)

    success = result.ok and _matches(recovered, msg.observed)
    if success and ens.mode is SourceMode.FIXED_K and len(result.support) > ens.k:
        logger.warning("recovered latent has %d nonzeros, more than k=%d", len(result.support), ens.k)
        success = False
    logger.debug("sdcic t=%d m=%d status=%s success=%s", t, active.m, result.status.value, success)
    return SchemeReport(
        scheme=SchemeKind.SDCIC,
        min_cut_rate=transport.bits,
        decode_op_count=transport.op_count + result.op_count,
        success=success,
        trial_seed=seed,
        extras={
            "status": result.status.value,
            "iterations": result.iterations,
            "rip_delta_2k": delta,
            "max_error": float(np.max(np.abs(recovered - msg.observed))),
        },
    )


def naive_roundtrip(ens: SourceEnsemble, t: int, seed: int) -> SchemeReport:
    """Every source transmits; decoding is the identity."""
    msg = sample_messages(ens, t, seed)
    everyone = ActiveSet(tuple(range(ens.n)), ActivationPolicy.FIXED, 1.0)
    transport = transport_active(ens, msg, everyone)
    return SchemeReport(
        scheme=SchemeKind.NAIVE,
        min_cut_rate=transport.bits,
        decode_op_count=transport.op_count,
        success=_matches(transport.values, msg.observed),
        trial_seed=seed,
    )
