"""Experiment configuration: INI files with one [experiment] section, CLI overrides."""

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from csnet import settings
from csnet.cs_core import SparsityError, plan_dimensions
from csnet.multicast import named_topology
from csnet.scc import codebook_bits
from csnet.utils import parse_number_list

SECTION = "experiment"

SUBCOMMANDS = ("cs-recover", "sdc-compare", "multicast-sim", "scc-sim", "rates")
OUTPUT_FORMATS = ("csv", "json")
MODES = ("fixed_k", "bernoulli_support")
POLICIES = ("bernoulli_gamma", "lowest_entropy")
MATRICES = ("bernoulli", "gaussian")


class ConfigError(ValueError):
    """A config that cannot run; each violation starts with the offending field."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _optional(kind):
    def parse(value):
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "auto")):
            return None
        return kind(value)

    return parse


def _text(value):
    return str(value).strip()


def _float_list(value):
    return tuple(parse_number_list(value, float))


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str = field(metadata={"parse": _text})
    master_seed: int | None = field(default=None, metadata={"parse": _optional(int)})
    trials: int = field(default=100, metadata={"parse": int})
    threads: int = field(default=1, metadata={"parse": int})
    output_path: str | None = field(default=None, metadata={"parse": _optional(_text)})
    output_format: str = field(default="csv", metadata={"parse": _text})
    timestamp: str | None = field(default=None, metadata={"parse": _optional(_text)})

    # dimensions and sources
    n: int = field(default=128, metadata={"parse": int})
    k: int = field(default=4, metadata={"parse": int})
    m: int | None = field(default=None, metadata={"parse": _optional(int)})
    rho: float = field(default=settings.DEFAULT_RHO, metadata={"parse": float})
    symbol_rate: int = field(default=4, metadata={"parse": int})
    alpha: float | None = field(default=None, metadata={"parse": _optional(float)})
    mode: str = field(default="fixed_k", metadata={"parse": _text})
    policy: str = field(default="bernoulli_gamma", metadata={"parse": _text})
    matrix: str = field(default="bernoulli", metadata={"parse": _text})
    epsilon_fraction: float = field(default=0.0, metadata={"parse": float})
    rip_samples: int = field(default=settings.DEFAULT_RIP_SAMPLES, metadata={"parse": int})

    # multicast
    topology: str = field(default="depth1", metadata={"parse": _text})
    field_bits: int = field(default=settings.DEFAULT_FIELD_BITS, metadata={"parse": int})

    # channel coding
    snr_db: tuple[float, ...] = field(default=(10.0, 20.0, 30.0, 40.0), metadata={"parse": _float_list})
    power: float = field(default=1.0, metadata={"parse": float})
    rate: float | None = field(default=None, metadata={"parse": _optional(float)})
    rate_margin: float = field(default=0.25, metadata={"parse": float})
    tau: float | None = field(default=None, metadata={"parse": _optional(float)})
    beta: float = field(default=settings.DEFAULT_BETA, metadata={"parse": float})
    calibration_trials: int = field(default=0, metadata={"parse": int})

    @property
    def resolved_output_path(self) -> Path:
        if self.output_path:
            return Path(self.output_path)
        return Path("data") / f"{self.subcommand}.{self.output_format}"


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def load_config(path) -> dict[str, str]:
    """Raw key/value strings of the file's [experiment] section."""
    parser = configparser.ConfigParser()
    try:
        found = parser.read(Path(path), encoding="utf-8")
    except configparser.Error as e:
        raise ValueError(f"cannot parse config file {path}: {e}") from e
    if not found:
        raise ValueError(f"cannot read config file {path}")
    if not parser.has_section(SECTION):
        raise ValueError(f"config file {path} has no [{SECTION}] section")
    return {key.replace("-", "_"): value for key, value in parser.items(SECTION)}


def build_config(file_values: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Merge file values with non-None overrides and parse each field.

    Unknown keys and unparsable values raise ValueError naming the key.
    """
    merged = {key.replace("-", "_"): value for key, value in file_values.items()}
    merged.update({key.replace("-", "_"): value for key, value in (overrides or {}).items() if value is not None})

    unknown = sorted(set(merged) - set(FIELD_NAMES))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    if "subcommand" not in merged:
        raise ValueError(f"subcommand is required; available: {', '.join(SUBCOMMANDS)}")

    parsed = {}
    for f in fields(ExperimentConfig):
        if f.name not in merged:
            continue
        try:
            parsed[f.name] = f.metadata["parse"](merged[f.name])
        except (TypeError, ValueError) as e:
            raise ValueError(f"{f.name}: cannot parse {merged[f.name]!r} ({e})") from e
    return ExperimentConfig(**parsed)


def validate(config: ExperimentConfig) -> list[str]:
    """Every violation in config, empty when it is runnable."""
    violations = []
    if config.subcommand not in SUBCOMMANDS:
        violations.append(f"subcommand must be one of {', '.join(SUBCOMMANDS)}, got {config.subcommand!r}")
    if config.master_seed is None:
        violations.append("master_seed is required")
    elif not 0 <= config.master_seed < 2**64:
        violations.append("master_seed must be a 64-bit unsigned integer")
    if config.trials < 1:
        violations.append("trials must be >= 1")
    if config.threads < 1:
        violations.append("threads must be >= 1")
    if config.output_format not in OUTPUT_FORMATS:
        violations.append(f"output_format must be one of {', '.join(OUTPUT_FORMATS)}")

    if config.n < 2:
        violations.append("n must be >= 2")
    if config.k < 1:
        violations.append("k must be >= 1")
    if config.k >= config.n:
        violations.append("k must be < n")
    if config.rho <= 0:
        violations.append("rho must be > 0")
    if config.m is not None and not 1 <= config.m <= config.n:
        violations.append("m must satisfy 1 <= m <= n")
    if config.m is None and 1 <= config.k < config.n and config.rho > 0:
        try:
            plan_dimensions(config.n, config.k, config.rho)
        except SparsityError as e:
            violations.append(f"rho: {e}")
    if config.symbol_rate < 1:
        violations.append("symbol_rate must be >= 1")
    if config.alpha is not None and not 0.0 < config.alpha < 1.0:
        violations.append("alpha must be in (0, 1)")
    if config.mode not in MODES:
        violations.append(f"mode must be one of {', '.join(MODES)}")
    if config.policy not in POLICIES:
        violations.append(f"policy must be one of {', '.join(POLICIES)}")
    if config.matrix not in MATRICES:
        violations.append(f"matrix must be one of {', '.join(MATRICES)}")
    if config.epsilon_fraction < 0:
        violations.append("epsilon_fraction must be >= 0")
    if config.rip_samples < 1:
        violations.append("rip_samples must be >= 1")

    if not 1 <= config.field_bits <= 16:
        violations.append("field_bits must be in [1, 16]")
    if not config.snr_db:
        violations.append("snr_db needs at least one value")
    if config.power <= 0:
        violations.append("power must be > 0")
    if config.rate is not None and config.rate < 0:
        violations.append("rate must be >= 0")
    if config.tau is not None and config.tau <= 0:
        violations.append("tau must be > 0")
    if config.beta < 1:
        violations.append("beta must be >= 1")
    if config.calibration_trials < 0:
        violations.append("calibration_trials must be >= 0")

    m = resolved_m(config) if not violations else None
    if m is not None and config.subcommand == "scc-sim":
        violations.extend(_codebook_violations(config, m))
    if m is not None and config.subcommand == "multicast-sim":
        violations.extend(_topology_violations(config, m))
    return violations


def check(config: ExperimentConfig) -> ExperimentConfig:
    """config itself when it is runnable.

    Raises:
        ConfigError: Listing every violation
    """
    violations = validate(config)
    if violations:
        raise ConfigError(violations)
    return config


def resolved_m(config: ExperimentConfig) -> int | None:
    """The explicit m, or the planned one; None when the dimensions do not plan."""
    if config.m is not None:
        return config.m
    try:
        return plan_dimensions(config.n, config.k, config.rho).m
    except ValueError:
        return None


def _codebook_violations(config: ExperimentConfig, m: int) -> list[str]:
    # an automatic rate is only known after the RIP estimate; build_codebook still caps it
    if config.rate is None:
        return []
    bits = codebook_bits(m, config.rate)
    if 2**bits > settings.MAX_CODEWORDS:
        return [f"rate: {config.rate} at m={m} needs 2^{bits} codewords, above the cap of {settings.MAX_CODEWORDS}"]
    return []


def _topology_violations(config: ExperimentConfig, m: int) -> list[str]:
    try:
        graph = named_topology(config.topology, n=config.n)
    except (OSError, ValueError) as e:
        return [f"topology: {e}"]
    if len(graph.sources) != config.n and len(graph.sources) < m:
        return [f"topology: {config.topology!r} has {len(graph.sources)} source nodes for m={m} active sources"]
    return []
