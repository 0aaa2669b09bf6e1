import logging

from csnet.experiments.sdc_compare import SdcCompareExperiment
from csnet.scc import (
    ChannelConfig,
    achievable_rate_terms,
    approx_rate,
    capacity,
    codebook_delta,
    codebook_matrix,
    timesharing_rate,
)
from csnet.sdc import rate_ordering_violations, rate_table
from csnet.solver import CapExceededError
from csnet.source_model import PLUGIN_MIN_SAMPLES, analytic_entropies, plugin_entropy_with_error
from csnet.utils import derive_seed

logger = logging.getLogger(__name__)


class RatesExperiment(SdcCompareExperiment):
    """Analytic rate tables only: compression schemes, entropies and channel rates."""

    name = "rates"
    summary_header = ("scheme", "min_cut_rate")

    def plugin_estimate(self, ens):
        samples = max(self.config.trials, PLUGIN_MIN_SAMPLES)
        try:
            return plugin_entropy_with_error(ens, samples, derive_seed(self.config.master_seed, "plugin"))
        except CapExceededError as exc:
            logger.info("skipping plug-in entropy: %s", exc)
            return None

    def rows(self):
        plan = self.plan()
        ens = self.ensemble()
        m = plan.m
        logger.info("rates: n=%d k=%d m=%d R=%d", ens.n, ens.k, m, ens.symbol_rate)

        rates = rate_table(ens, m)
        violations = rate_ordering_violations(rates)
        for violation in violations:
            logger.warning("rate ordering: %s", violation)
        for report in rates:
            self.summary.append((report.scheme.value, report.min_cut_rate))
            yield self.row(
                plan=plan,
                row_kind="rate",
                label=report.scheme.value,
                seed=self.config.master_seed,
                alpha=ens.alpha,
                min_cut_rate=report.min_cut_rate,
                value=report.min_cut_rate,
            )

        entropies = analytic_entropies(ens, m)
        plugin = self.plugin_estimate(ens)
        yield self.row(
            plan=plan,
            row_kind="entropy",
            label="joint",
            seed=self.config.master_seed,
            alpha=ens.alpha,
            value=entropies.joint,
            details={
                "joint_approx": entropies.joint_approx,
                "joint_exact": entropies.joint_exact,
                "per_source": entropies.per_source,
                "subset_m": entropies.subset_m,
                "sum_active": entropies.sum_active,
                "sum_all": entropies.sum_all,
                "plugin": plugin.bits if plugin else None,
                "plugin_standard_error": plugin.standard_error if plugin else None,
                "ordering_violations": entropies.ordering_violations() + violations,
            },
        )

        codebook_seed = derive_seed(self.config.master_seed, "codebook")
        delta_k = codebook_delta(codebook_matrix(plan, codebook_seed), plan.k, codebook_seed, self.config.rip_samples)
        for snr_db in self.config.snr_db:
            C = capacity(ChannelConfig.from_snr_db(snr_db, self.config.power))
            terms = achievable_rate_terms(plan.k, plan.m, plan.n, plan.alpha, self.config.beta, delta_k, C)
            yield self.row(
                plan=plan,
                row_kind="channel",
                label="scc",
                seed=self.config.master_seed,
                snr_db=snr_db,
                rate=terms.total,
                value=C,
                details={
                    "inner": terms.inner,
                    "outer": terms.outer,
                    "power_loss": terms.power_loss,
                    "delta_k": delta_k,
                    "approx_rate": approx_rate(plan.alpha, C, rho=plan.rho),
                    "timesharing_rate": timesharing_rate(plan.k, plan.m, C),
                },
            )
