# -*- coding: utf-8 -*-

# Settings for the csnet experiment runner
#
# Everything here is a plain module-level constant so that experiments,
# pipelines and tests read the same values. Environment variables
# override the few settings that differ between deployments.
import os

PROJECT_NAME = "csnet"

# Bumped whenever a column is added to, removed from or renamed in ResultRow
SCHEMA_VERSION = 1

# m = rho k ln(n / k); the natural-log base is absorbed into rho
DEFAULT_RHO = 3.0

# Exhaustive RIP enumeration whenever C(n, k) does not exceed this
EXHAUSTIVE_CAP = 100_000

# l0 oracle enumeration cap on C(n, k_max)
L0_ORACLE_CAP = 1_000_000

# Per-coordinate tolerance for "exact" recovery
RECOVERY_TOLERANCE = 1e-6

# Quantised multicast payloads are compared with a looser tolerance
MULTICAST_TOLERANCE = 1e-3

# GF(2^q) used by random linear network coding
DEFAULT_FIELD_BITS = 8
QUANTIZER_BITS = 16

# Sparse channel code limits
MAX_CODEWORDS = 2**20
DEFAULT_BETA = 2.0
TAU_NOISE_MULTIPLE = 4.0

# Random k-column subsets drawn for the RIP sanity checks of the pipelines
DEFAULT_RIP_SAMPLES = 200

# Configure result pipelines
RESULT_PIPELINES = {
    "csnet.pipelines.ResultPipeline": 200,
    "csnet.pipelines.FilePipeline": 300,
    "csnet.pipelines.DatabasePipeline": 400,
}

DATABASE_URL = os.environ.get("DATABASE_URL")

# In test mode, or without a database, rows only go to the result file.
if os.environ.get("ENVIRONMENT") == "TEST" or not DATABASE_URL:
    RESULT_PIPELINES.pop("csnet.pipelines.DatabasePipeline")
