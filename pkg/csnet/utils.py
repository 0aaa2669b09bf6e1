"""
Utility functions shared by the csnet modules
"""

import os
import zlib
from datetime import datetime, timezone

import numpy as np


def _seed_sequence(seed: int, purpose: str, counters) -> np.random.SeedSequence:
    label = zlib.crc32(purpose.encode("utf-8"))
    return np.random.SeedSequence([int(seed), label, *(int(c) for c in counters)])


def derive_seed(seed: int, purpose: str, *counters: int) -> int:
    """Derive a child seed from a master seed, a purpose label and counters.

    The derivation is counter based, so the seed of trial 17 does not
    depend on whether trials 0-16 ran first.

    Example:
        >>> derive_seed(1, "trial", 3) == derive_seed(1, "trial", 3)
        True
    """
    return int(_seed_sequence(seed, purpose, counters).generate_state(1, np.uint64)[0])


def derive_rng(seed: int, purpose: str, *counters: int) -> np.random.Generator:
    """Return a generator seeded by derive_seed's sequence."""
    return np.random.default_rng(_seed_sequence(seed, purpose, counters))


def parse_number_list(value: str | list | tuple, kind=float) -> list:
    """Parse "10,20,30" (or an already split list) into numbers."""
    if isinstance(value, (list, tuple)):
        return [kind(v) for v in value]
    return [kind(text.strip()) for text in value.split(",") if text.strip()]


def run_timestamp() -> str:
    """ISO timestamp from SOURCE_DATE_EPOCH, or an empty string.

    Result files must be byte-identical across reruns, so the wall clock is
    never consulted.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if not epoch:
        return ""
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
