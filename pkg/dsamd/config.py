"""Configuration settings for dsamd."""

import os
import sys
from enum import Enum
from pathlib import Path

from dotenv import load_dotenv
from loguru import logger


class Algorithm(str, Enum):
    DSAMD = "dsamd"
    ADSAMD = "adsamd"
    CENTRAL_MD = "central_md"
    CENTRAL_AMD = "central_amd"
    LOCAL_MD = "local_md"
    LOCAL_AMD = "local_amd"
    DGD_NAIVE = "dgd_naive"
    DGD_MINIBATCH = "dgd_minibatch"


class MixingRule(str, Enum):
    MEAN_FOR_COMPLETE = "mean_for_complete"
    METROPOLIS = "metropolis"
    MAX_DEGREE = "max_degree"


class StepSizePreset(str, Enum):
    """Step-size tables tuned for the two graph settings of the logistic experiment."""

    FULLY_CONNECTED = "fully_connected"
    SPARSE = "sparse"


class Regime(str, Enum):
    T_EQ_M = "T_eq_m"
    T_EQ_SQRT_M = "T_eq_sqrt_m"
    EXPLICIT = "explicit"


# Base step sizes. Accelerated engines use gamma_s = gamma * (s + 1) / 2.
# AD-SAMD runs at a tenth of 20, 28 and 8, which diverge on this task (L_est near 15 at d = 20).
STEP_SIZES: dict[StepSizePreset, dict[Algorithm, float]] = {
    StepSizePreset.FULLY_CONNECTED: {
        Algorithm.CENTRAL_MD: 0.5,
        Algorithm.LOCAL_MD: 0.5,
        Algorithm.CENTRAL_AMD: 2.0,
        Algorithm.LOCAL_AMD: 2.0,
        Algorithm.DGD_NAIVE: 5.0,
        Algorithm.DGD_MINIBATCH: 5.0,
        Algorithm.DSAMD: 5.0,
        Algorithm.ADSAMD: 2.0,
    },
    StepSizePreset.SPARSE: {
        Algorithm.CENTRAL_MD: 0.5,
        Algorithm.LOCAL_MD: 0.5,
        Algorithm.CENTRAL_AMD: 2.0,
        Algorithm.LOCAL_AMD: 2.0,
        Algorithm.DGD_NAIVE: 5.0,
        Algorithm.DGD_MINIBATCH: 5.0,
        Algorithm.DSAMD: 5.0,
        Algorithm.ADSAMD: 2.8,
    },
}

# Overrides that only apply in the T = sqrt(m) regime on sparse graphs
SQRT_REGIME_OVERRIDES: dict[StepSizePreset, dict[Algorithm, float]] = {
    StepSizePreset.FULLY_CONNECTED: {},
    StepSizePreset.SPARSE: {
        Algorithm.DSAMD: 2.5,
        Algorithm.ADSAMD: 0.8,
    },
}


def default_step_size(algorithm: Algorithm, preset: StepSizePreset, regime: Regime) -> float:
    """Look up the tuned base step size for an algorithm."""
    if regime == Regime.T_EQ_SQRT_M and algorithm in SQRT_REGIME_OVERRIDES[preset]:
        return SQRT_REGIME_OVERRIDES[preset][algorithm]
    return STEP_SIZES[preset][algorithm]


# Logistic task defaults
TASK_DIMENSION = 20
TASK_SIGMA_R2 = 2.0
TASK_LABEL_PRIOR = 0.5

# Ground truth
N_EVAL = 100_000
HOLDOUT_GRAD_TOL = 1e-10

# Geometry
DEFAULT_GEOMETRY = "euclidean"
DEFAULT_BALL_RADIUS = 100.0  # never clips the logistic iterates
PROX_TOL = 1e-10
PROX_MAX_ITERS = 10_000
PROX_MIN_STEP = 1e-16  # backtracking floor
PROX_STALL_TOL = 1e-14  # relative objective decrease treated as no progress
PROX_STALL_RESIDUAL = 1e-8  # largest step accepted as converged once progress stalls
DOMAIN_TOL = 1e-9

# Network
MAX_GRAPH_RETRIES = 1_000
LAMBDA2_ZERO_TOL = 1e-12  # spectral values below this are treated as exact averaging

# Sampling
STREAM_BLOCK_SIZE = 256  # samples per counter-keyed generator block

# Sweep defaults (desk scale)
DEFAULT_M_LIST = [4, 8, 16, 32, 64]
DEFAULT_RHO = 0.5
DEFAULT_INSTANCES = 200
DEFAULT_C_MULT = 0.1
DEFAULT_MASTER_SEED = 20_170_901

# Environment overrides, read once at import
load_dotenv()

# Base paths
PROJECT_ROOT = Path(__file__).parent
TEMPLATES_PATH = PROJECT_ROOT / "templates"
OUTPUT_PATH = Path(os.getenv("DSAMD_OUTPUT_PATH", PROJECT_ROOT.parent / "output"))
CACHE_DIR = os.getenv("DSAMD_CACHE_DIR")

# Runtime
LOG_LEVEL = os.getenv("DSAMD_LOG_LEVEL", "INFO")
DEFAULT_JOBS = int(os.getenv("DSAMD_JOBS", "1"))


def setup_logging(level: str = LOG_LEVEL, log_file: Path | None = None) -> None:
    """Replace the default loguru sink.

    Args:
        level: Minimum level for the stderr sink
        log_file: Optional file sink, rotated like the run logs
    """
    logger.remove()
    logger.add(sys.stderr, level=level)
    if log_file is not None:
        logger.add(log_file, rotation="500 MB", level="DEBUG")
