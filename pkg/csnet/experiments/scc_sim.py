import logging

from csnet.experiments.base import Experiment
from csnet.scc import (
    ChannelConfig,
    DecoderConfig,
    achievable_rate,
    approx_rate,
    build_codebook,
    calibrate_beta,
    capacity,
    codebook_delta,
    codebook_matrix,
    error_exponent_bound,
    monte_carlo_pe,
    support_error_analytic,
    timesharing_rate,
    union_error_bound,
)
from csnet.utils import derive_seed

logger = logging.getLogger(__name__)


class SccSimExperiment(Experiment):
    """Monte-Carlo message error of sparse channel codes across SNRs."""

    name = "scc-sim"
    summary_header = ("snr_db", "rate", "codewords", "pe", "ci_low", "ci_high", "achievable", "power_violations")

    def channel_rate(self, plan, delta_k: float, C: float) -> float:
        if self.config.rate is not None:
            return self.config.rate
        nominal = achievable_rate(plan.k, plan.m, plan.n, plan.alpha, self.config.beta, delta_k, C)
        return max(nominal - self.config.rate_margin, 0.0)

    def rows(self):
        plan = self.plan()
        codebook_seed = derive_seed(self.config.master_seed, "codebook")
        delta_k = codebook_delta(codebook_matrix(plan, codebook_seed), plan.k, codebook_seed, self.config.rip_samples)
        logger.info("scc-sim: n=%d k=%d m=%d, delta_k %.3f, snr %s dB", plan.n, plan.k, plan.m, delta_k, self.config.snr_db)

        for index, snr_db in enumerate(self.config.snr_db):
            ch = ChannelConfig.from_snr_db(snr_db, self.config.power)
            C = capacity(ch)
            rate = self.channel_rate(plan, delta_k, C)
            cb = build_codebook(plan, ch, rate, codebook_seed, rip_samples=self.config.rip_samples)
            dec = DecoderConfig.default(ch, plan.m, plan.n, beta=self.config.beta)
            if self.config.tau is not None:
                dec = DecoderConfig(tau=self.config.tau, noise_power=ch.noise_power, beta=self.config.beta)

            estimate = monte_carlo_pe(
                cb, ch, dec, self.config.trials, derive_seed(self.config.master_seed, "trials", index), self.config.threads
            )
            achievable = achievable_rate(plan.k, plan.m, plan.n, plan.alpha, dec.beta, cb.delta_k, C)
            support = support_error_analytic(dec, ch, plan.m, plan.n, plan.alpha, empirical=estimate.support)
            beta_hat = None
            if self.config.calibration_trials:
                beta_hat = calibrate_beta(
                    cb, ch, dec, self.config.calibration_trials, derive_seed(self.config.master_seed, "calibration", index)
                )
            logger.info("snr %.1f dB: rate %.4f, %d codewords, pe %.4f", snr_db, cb.rate, cb.size, estimate.pe)

            self.summary.append(
                (snr_db, cb.rate, cb.size, estimate.pe, estimate.ci_low, estimate.ci_high, achievable, estimate.power_violations)
            )
            yield self.row(
                plan=plan,
                row_kind="aggregate",
                label="scc",
                seed=self.config.master_seed,
                snr_db=snr_db,
                rate=cb.rate,
                success_rate=1.0 - estimate.pe,
                value=estimate.pe,
                ci_low=estimate.ci_low,
                ci_high=estimate.ci_high,
                details={
                    "trials": estimate.trials,
                    "errors": estimate.errors,
                    "codewords": cb.size,
                    "nominal_rate": cb.nominal_rate,
                    "delta_k": cb.delta_k,
                    "tau": dec.tau,
                    "beta": dec.beta,
                    "beta_hat": beta_hat,
                    "capacity": C,
                    "achievable_rate": achievable,
                    "approx_rate": approx_rate(plan.alpha, C, rho=plan.rho),
                    "timesharing_rate": timesharing_rate(plan.k, plan.m, C),
                    "error_exponent": error_exponent_bound(plan.n, plan.alpha, dec.beta, cb.delta_k, ch).exponent,
                    "union_bound": union_error_bound(plan.m, cb.rate, plan.k, plan.n, plan.alpha, dec.beta, cb.delta_k, C),
                    "power_violations": estimate.power_violations,
                    "codebook_power_violation_rate": cb.power_violation_rate,
                    "support_failures": estimate.support_failures,
                    "ml_failures": estimate.ml_failures,
                    "cross_pattern_errors": estimate.cross_pattern_errors,
                    "residual_violations": estimate.residual_violations,
                    "support_verbatim_pattern": support.verbatim_pattern,
                    "support_corrected_pattern": support.corrected_pattern,
                    "support_empirical_zero": estimate.support.zero,
                    "support_empirical_nonzero": estimate.support.nonzero,
                    "support_empirical_pattern": estimate.support.pattern,
                    "support_pattern_gap": support.corrected_gaps()["pattern"],
                    "support_flags": list(support.flags),
                },
            )
