"""Command line entry point: csnet <subcommand> [--config FILE] [--flag value ...]"""

import argparse
import logging
import sys

from csnet.config import SUBCOMMANDS, build_config, load_config
from csnet.runner import run

logger = logging.getLogger(__name__)

# flag -> config field; every flag is a plain string handed to build_config
PARAMETER_FLAGS = (
    ("--master-seed", "Master seed, required either here or in the config file"),
    ("--trials", "Number of Monte-Carlo trials"),
    ("--threads", "Worker threads for trials"),
    ("--output", "Result file path (default data/<subcommand>.<format>)"),
    ("--format", "csv or json"),
    ("--timestamp", "Timestamp stamped on every row"),
    ("--n", "Signal length / number of sources"),
    ("--k", "Sparsity"),
    ("--m", "Measurements / active sources; derived from rho when omitted"),
    ("--rho", "Oversampling constant in m = rho k ln(n / k)"),
    ("--symbol-rate", "Bits R per nonzero latent value"),
    ("--alpha", "Support probability in bernoulli_support mode"),
    ("--mode", "fixed_k or bernoulli_support"),
    ("--policy", "bernoulli_gamma or lowest_entropy"),
    ("--matrix", "bernoulli or gaussian"),
    ("--epsilon-fraction", "Noise radius as a fraction of ||y||; 0 for exact recovery"),
    ("--rip-samples", "Random subsets per sampled RIP constant"),
    ("--topology", "depth1, depth1:<n>, butterfly or a graph file"),
    ("--field-bits", "q of the GF(2^q) network code"),
    ("--snr-db", "Comma separated SNR list in dB"),
    ("--power", "Channel input power P"),
    ("--rate", "Channel code rate; auto uses the achievable rate minus --rate-margin"),
    ("--rate-margin", "Backoff from the achievable rate for the auto rate"),
    ("--tau", "Support detection threshold; default 4 sqrt(beta m N / n)"),
    ("--beta", "Denoising error constant"),
    ("--calibration-trials", "Trials for the empirical beta estimate; 0 skips it"),
)

# flags whose config field name differs from the flag name
FIELD_FOR_FLAG = {"--output": "output_path", "--format": "output_format"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csnet", description="Compressive sensing network coding experiments")
    parser.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS, help="Experiment to run")
    parser.add_argument("--config", help="INI file with an [experiment] section")
    parser.add_argument("--loglevel", default="INFO", help="Log level (default INFO)")
    for flag, help_text in PARAMETER_FLAGS:
        parser.add_argument(flag, dest=FIELD_FOR_FLAG.get(flag, flag[2:].replace("-", "_")), help=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.loglevel.upper(),
        format="%(levelname)-5.5s [%(name)s] %(message)s",
    )

    overrides = {key: value for key, value in vars(args).items() if key not in ("config", "loglevel")}
    try:
        file_values = load_config(args.config) if args.config else {}
        config = build_config(file_values, overrides)
    except ValueError as e:
        logger.error("%s", e)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
