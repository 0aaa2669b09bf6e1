from csnet.experiments.base import Experiment
from csnet.experiments.cs_recover import CsRecoverExperiment
from csnet.experiments.multicast_sim import MulticastSimExperiment
from csnet.experiments.rates import RatesExperiment
from csnet.experiments.scc_sim import SccSimExperiment
from csnet.experiments.sdc_compare import SdcCompareExperiment

__all__ = [
    "Experiment",
    "CsRecoverExperiment",
    "SdcCompareExperiment",
    "MulticastSimExperiment",
    "SccSimExperiment",
    "RatesExperiment",
]
