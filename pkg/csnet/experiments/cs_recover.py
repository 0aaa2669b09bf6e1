import logging
from dataclasses import dataclass

import numpy as np

from csnet import settings
from csnet.cs_core import (
    NonzeroLaw,
    generate_bernoulli_matrix,
    generate_gaussian_matrix,
    generate_sparse_signal,
    measure,
)
from csnet.experiments.base import Experiment
from csnet.solver import DenoiseConfig, basis_pursuit, basis_pursuit_denoise
from csnet.utils import derive_rng, derive_seed

logger = logging.getLogger(__name__)

MATRIX_GENERATORS = {
    "bernoulli": generate_bernoulli_matrix,
    "gaussian": generate_gaussian_matrix,
}


@dataclass(frozen=True)
class RecoveryTrial:
    trial: int
    seed: int
    success: bool
    max_error: float
    ratio: float | None
    op_count: int
    status: str
    iterations: int


class CsRecoverExperiment(Experiment):
    """Exact (or noisy, with epsilon_fraction > 0) recovery of random k-sparse signals."""

    name = "cs-recover"
    summary_header = ("decoder", "n", "k", "m", "trials", "success_rate", "ci_low", "ci_high", "beta_hat")

    def run_trial(self, plan, trial: int) -> RecoveryTrial:
        seed = self.trial_seed(trial)
        phi = MATRIX_GENERATORS[self.config.matrix](plan.m, plan.n, derive_seed(seed, "phi"))
        x = generate_sparse_signal(plan.n, plan.k, NonzeroLaw.gaussian(), derive_seed(seed, "signal"))
        y = measure(phi, x)

        ratio = None
        if self.config.epsilon_fraction > 0:
            epsilon = self.config.epsilon_fraction * float(np.linalg.norm(y))
            direction = derive_rng(seed, "noise").normal(size=plan.m)
            y = y + epsilon * direction / np.linalg.norm(direction)
            result = basis_pursuit_denoise(phi, y, DenoiseConfig(epsilon=epsilon))
            ratio = float(np.linalg.norm(result.x - x.entries) / epsilon)
        else:
            result = basis_pursuit(phi, y)

        max_error = float(np.max(np.abs(result.x - x.entries)))
        success = result.ok and max_error <= settings.RECOVERY_TOLERANCE
        logger.debug("trial %d: status=%s error=%.3g", trial, result.status.value, max_error)
        return RecoveryTrial(
            trial=trial,
            seed=seed,
            success=success,
            max_error=max_error,
            ratio=ratio,
            op_count=result.op_count,
            status=result.status.value,
            iterations=result.iterations,
        )

    def rows(self):
        plan = self.plan()
        noisy = self.config.epsilon_fraction > 0
        decoder = "basis_pursuit_denoise" if noisy else "basis_pursuit"
        logger.info("cs-recover: n=%d k=%d m=%d, %d trials, %s", plan.n, plan.k, plan.m, self.config.trials, decoder)

        trials = self.map_trials(lambda trial: self.run_trial(plan, trial))
        for outcome in trials:
            yield self.row(
                plan=plan,
                row_kind="trial",
                label=decoder,
                trial=outcome.trial,
                seed=outcome.seed,
                success=outcome.success,
                op_count=outcome.op_count,
                value=outcome.ratio if noisy else outcome.max_error,
                details={"status": outcome.status, "iterations": outcome.iterations},
            )

        successes = sum(outcome.success for outcome in trials)
        ci_low, ci_high = self.success_interval(successes, len(trials))
        beta_hat = float(np.percentile([outcome.ratio for outcome in trials], 95)) if noisy else None
        success_rate = successes / len(trials)
        self.summary.append((decoder, plan.n, plan.k, plan.m, len(trials), success_rate, ci_low, ci_high, beta_hat))
        yield self.row(
            plan=plan,
            row_kind="aggregate",
            label=decoder,
            seed=self.config.master_seed,
            success_rate=success_rate,
            op_count=self.mean(outcome.op_count for outcome in trials),
            value=beta_hat,
            ci_low=ci_low,
            ci_high=ci_high,
            details={"epsilon_fraction": self.config.epsilon_fraction, "matrix": self.config.matrix},
        )
