from .adsamd import Adsamd, run_adsamd
from .base import AcceleratedMirrorDescent, AdsamdState, AveragedMirrorDescent, ConvergenceTrace, DsamdState, MirrorDescentEngine
from .baselines import BASELINES, build_baseline, dgd_period, run_baseline
from .dsamd import Dsamd, run_dsamd
from .schedule import consensus_budget, corollary_batch_size, make_schedule

__all__ = [
    "AcceleratedMirrorDescent",
    "Adsamd",
    "AdsamdState",
    "AveragedMirrorDescent",
    "BASELINES",
    "ConvergenceTrace",
    "Dsamd",
    "DsamdState",
    "MirrorDescentEngine",
    "build_baseline",
    "consensus_budget",
    "corollary_batch_size",
    "dgd_period",
    "make_schedule",
    "run_adsamd",
    "run_baseline",
    "run_dsamd",
]
