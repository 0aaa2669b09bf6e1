import logging

from csnet.experiments.base import Experiment
from csnet.sdc import (
    SchemeKind,
    naive_roundtrip,
    rate_ordering_violations,
    rate_table,
    sdcic_roundtrip,
    select_active_sources,
)
from csnet.source_model import analytic_entropies, make_ensemble
from csnet.utils import derive_seed

logger = logging.getLogger(__name__)


class SdcCompareExperiment(Experiment):
    """Rate table plus measured SDCIC and naive round trips on one ensemble."""

    name = "sdc-compare"
    summary_header = ("scheme", "min_cut_rate", "trials", "success_rate", "mean_op_count")

    def ensemble(self):
        return make_ensemble(
            self.config.n,
            self.config.k,
            self.config.symbol_rate,
            self.config.mode,
            derive_seed(self.config.master_seed, "ensemble"),
            alpha=self.config.alpha,
        )

    def run_trial(self, ens, m: int, trial: int):
        seed = self.trial_seed(trial)
        active = select_active_sources(ens, m, self.config.policy, seed=seed)
        sdcic = sdcic_roundtrip(ens, active, trial, seed, rip_samples=self.config.rip_samples)
        naive = naive_roundtrip(ens, trial, seed)
        return trial, seed, active, sdcic, naive

    def rows(self):
        plan = self.plan()
        ens = self.ensemble()
        m = plan.m
        logger.info("sdc-compare: n=%d k=%d m=%d R=%d, %d trials", ens.n, ens.k, m, ens.symbol_rate, self.config.trials)

        rates = rate_table(ens, m)
        for violation in rate_ordering_violations(rates):
            logger.warning("rate ordering: %s", violation)
        entropies = analytic_entropies(ens, m)
        for report in rates:
            yield self.row(
                plan=plan,
                row_kind="rate",
                label=report.scheme.value,
                alpha=ens.alpha,
                min_cut_rate=report.min_cut_rate,
                details={"joint_exact": entropies.joint_exact, "joint_approx": entropies.joint_approx},
            )

        outcomes = self.map_trials(lambda trial: self.run_trial(ens, m, trial))
        collected = {SchemeKind.SDCIC: [], SchemeKind.NAIVE: []}
        for trial, seed, active, sdcic, naive in outcomes:
            for report in (sdcic, naive):
                collected[report.scheme].append(report)
                yield self.row(
                    plan=plan,
                    row_kind="trial",
                    label=report.scheme.value,
                    trial=trial,
                    seed=seed,
                    alpha=ens.alpha,
                    success=report.success,
                    min_cut_rate=report.min_cut_rate,
                    op_count=report.decode_op_count,
                    details={**report.extras, "pre_trim_size": active.pre_trim_size},
                )

        by_scheme = {report.scheme: report for report in rates}
        for scheme in SchemeKind:
            reports = collected.get(scheme, [])
            success_rate = sum(r.success for r in reports) / len(reports) if reports else None
            ci_low, ci_high = self.success_interval(sum(r.success for r in reports), len(reports)) if reports else (None, None)
            mean_ops = self.mean(r.decode_op_count for r in reports)
            self.summary.append((scheme.value, by_scheme[scheme].min_cut_rate, len(reports), success_rate, mean_ops))
            yield self.row(
                plan=plan,
                row_kind="aggregate",
                label=scheme.value,
                seed=self.config.master_seed,
                alpha=ens.alpha,
                success_rate=success_rate,
                min_cut_rate=by_scheme[scheme].min_cut_rate,
                op_count=mean_ops,
                ci_low=ci_low,
                ci_high=ci_high,
            )
