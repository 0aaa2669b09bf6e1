import logging
from collections import defaultdict

from csnet.experiments.sdc_compare import SdcCompareExperiment
from csnet.multicast import min_cut, multicast_rate_table, named_topology, sdcic_multicast_roundtrip
from csnet.sdc import select_active_sources

logger = logging.getLogger(__name__)


class MulticastSimExperiment(SdcCompareExperiment):
    """SDCIC over a network-coded multicast graph, success per receiver."""

    name = "multicast-sim"
    summary_header = ("receiver", "min_cut", "trials", "success_rate", "ci_low", "ci_high")

    def run_trial(self, ens, graph, m: int, trial: int):
        seed = self.trial_seed(trial)
        active = select_active_sources(ens, m, self.config.policy, seed=seed)
        reports = sdcic_multicast_roundtrip(
            ens, graph, active, trial, seed, q=self.config.field_bits, rip_samples=self.config.rip_samples
        )
        return trial, seed, reports

    def rows(self):
        plan = self.plan()
        ens = self.ensemble()
        graph = named_topology(self.config.topology, n=ens.n)
        m = plan.m
        logger.info(
            "multicast-sim: %s with %d receivers, n=%d m=%d q=%d, %d trials",
            self.config.topology,
            len(graph.receivers),
            ens.n,
            m,
            self.config.field_bits,
            self.config.trials,
        )

        for report in multicast_rate_table(ens, m):
            yield self.row(
                plan=plan,
                row_kind="rate",
                label=report.scheme.value,
                alpha=ens.alpha,
                min_cut_rate=report.min_cut_rate,
                details=report.extras,
            )

        per_receiver = defaultdict(list)
        for trial, seed, reports in self.map_trials(lambda trial: self.run_trial(ens, graph, m, trial)):
            for report in reports:
                per_receiver[report.receiver].append(report)
                yield self.row(
                    plan=plan,
                    row_kind="trial",
                    label=f"receiver-{report.receiver}",
                    trial=trial,
                    seed=seed,
                    alpha=ens.alpha,
                    success=report.success,
                    min_cut_rate=report.min_cut_rate,
                    op_count=report.decode_op_count,
                    details=report.extras,
                )

        for receiver in graph.receivers:
            reports = per_receiver[receiver]
            successes = sum(r.success for r in reports)
            ci_low, ci_high = self.success_interval(successes, len(reports))
            cut = min_cut(graph, set(graph.sources), receiver)
            self.summary.append((receiver, cut, len(reports), successes / len(reports), ci_low, ci_high))
            yield self.row(
                plan=plan,
                row_kind="aggregate",
                label=f"receiver-{receiver}",
                seed=self.config.master_seed,
                alpha=ens.alpha,
                success_rate=successes / len(reports),
                min_cut_rate=reports[0].min_cut_rate,
                op_count=self.mean(r.decode_op_count for r in reports),
                value=cut,
                ci_low=ci_low,
                ci_high=ci_high,
                details={"topology": self.config.topology, "field_bits": self.config.field_bits},
            )
