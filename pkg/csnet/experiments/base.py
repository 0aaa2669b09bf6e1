from abc import ABC, abstractmethod
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import binomtest

from csnet.config import ExperimentConfig
from csnet.cs_core import DimensionPlan, plan_dimensions
from csnet.items import ResultRow
from csnet.utils import derive_seed, run_timestamp


class Experiment(ABC):
    """One subcommand: yields result rows and collects a summary table."""

    name: str = ""
    summary_header: tuple[str, ...] = ()

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.summary: list[tuple] = []

    @property
    def output_path(self):
        return self.config.resolved_output_path

    @property
    def output_format(self) -> str:
        return self.config.output_format

    @property
    def timestamp(self) -> str:
        return self.config.timestamp or run_timestamp()

    @property
    def run_id(self) -> str:
        return f"{self.name}-{self.config.master_seed}"

    def plan(self) -> DimensionPlan:
        if self.config.m is not None:
            return DimensionPlan.explicit(self.config.n, self.config.k, self.config.m)
        return plan_dimensions(self.config.n, self.config.k, self.config.rho)

    def trial_seed(self, trial: int) -> int:
        return derive_seed(self.config.master_seed, self.name, trial)

    def map_trials(self, fn: Callable[[int], object], count: int | None = None) -> list:
        """fn over trial indices on the configured threads, results in trial order."""
        count = self.config.trials if count is None else count
        with ThreadPoolExecutor(max_workers=self.config.threads) as executor:
            return list(executor.map(fn, range(count)))

    def row(self, **values) -> ResultRow:
        plan = values.pop("plan", None)
        row = ResultRow(n=self.config.n, k=self.config.k, rho=self.config.rho, symbol_rate=self.config.symbol_rate)
        if plan is not None:
            row.update(m=plan.m, rho=plan.rho, alpha=plan.alpha)
        row.update({key: value for key, value in values.items() if value is not None})
        return row

    @staticmethod
    def success_interval(successes: int, trials: int) -> tuple[float, float]:
        interval = binomtest(int(successes), trials).proportion_ci(confidence_level=0.95, method="exact")
        return float(interval.low), float(interval.high)

    @staticmethod
    def mean(values) -> float | None:
        values = [value for value in values if value is not None]
        return float(np.mean(values)) if values else None

    @abstractmethod
    def rows(self) -> Iterator[ResultRow]:
        pass

    def summary_lines(self) -> list[str]:
        if not self.summary:
            return []
        cells = [self.summary_header] + [tuple(_format_cell(value) for value in line) for line in self.summary]
        widths = [max(len(str(line[i])) for line in cells) for i in range(len(self.summary_header))]
        lines = ["  ".join(str(value).ljust(width) for value, width in zip(line, widths)).rstrip() for line in cells]
        lines.insert(1, "  ".join("-" * width for width in widths))
        return lines


def _format_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
