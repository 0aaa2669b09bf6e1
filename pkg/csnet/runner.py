"""Runner: looks up the experiment for a subcommand and feeds its rows through the pipelines."""

import logging

from scrapy.utils.misc import load_object

from csnet import settings
from csnet.config import ConfigError, ExperimentConfig, check
from csnet.experiments import (
    CsRecoverExperiment,
    Experiment,
    MulticastSimExperiment,
    RatesExperiment,
    SccSimExperiment,
    SdcCompareExperiment,
)

logger = logging.getLogger(__name__)


# Registry: subcommand -> experiment class
EXPERIMENTS: dict[str, type[Experiment]] = {
    "cs-recover": CsRecoverExperiment,
    "sdc-compare": SdcCompareExperiment,
    "multicast-sim": MulticastSimExperiment,
    "scc-sim": SccSimExperiment,
    "rates": RatesExperiment,
}


def get_experiment(subcommand: str) -> type[Experiment]:
    """Experiment class for a subcommand.

    Raises:
        ValueError: If the subcommand is unknown
    """
    key = subcommand.lower().strip()
    if key not in EXPERIMENTS:
        available = ", ".join(sorted(EXPERIMENTS.keys()))
        raise ValueError(f"Unknown subcommand '{subcommand}'. Available: {available}")
    return EXPERIMENTS[key]


def load_pipelines(table: dict[str, int] | None = None) -> list:
    """Instantiate the pipelines of a {dotted path: priority} table, lowest priority first."""
    table = settings.RESULT_PIPELINES if table is None else table
    return [load_object(path)() for path, _ in sorted(table.items(), key=lambda entry: entry[1])]


def _close(pipelines, experiment, failed: bool):
    for pipeline in pipelines:
        close_run = getattr(pipeline, "close_run", None)
        if close_run is not None:
            close_run(experiment, failed=failed)


def run(config: ExperimentConfig, pipelines: list | None = None) -> int:
    """Run one experiment; 0 on completion, 2 on an invalid config, 1 on an I/O failure.

    Decode failures are results, not errors, and never change the exit status.
    """
    try:
        check(config)
    except ConfigError as e:
        for violation in e.violations:
            logger.error("invalid config: %s", violation)
        return 2
    if config.m is not None and config.m <= config.k:
        logger.warning("m=%d <= k=%d: undersampled control run, recovery is expected to fail", config.m, config.k)

    experiment = get_experiment(config.subcommand)(config)
    pipelines = load_pipelines() if pipelines is None else pipelines
    opened = []
    try:
        for pipeline in pipelines:
            open_run = getattr(pipeline, "open_run", None)
            if open_run is not None:
                open_run(experiment)
            opened.append(pipeline)

        count = 0
        for row in experiment.rows():
            for pipeline in pipelines:
                row = pipeline.process_item(row, experiment)
            count += 1
    except OSError as e:
        logger.error("aborting %s: %s", experiment.name, e)
        _close(opened, experiment, failed=True)
        return 1
    except Exception:
        _close(opened, experiment, failed=True)
        raise

    _close(opened, experiment, failed=False)
    logger.info("%s: %d rows written to %s", experiment.name, count, experiment.output_path)

    print(f"\n{experiment.name} (master seed {config.master_seed})")
    for line in experiment.summary_lines():
        print(line)
    return 0
