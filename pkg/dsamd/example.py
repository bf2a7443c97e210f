"""Example usage: a small fully connected sweep in the T = m regime."""

from .config import OUTPUT_PATH, Algorithm, setup_logging
from .harness import emit, run_sweep
from .models import AlgorithmSpec, EvalParams, ExperimentConfig, GraphFamily

if __name__ == "__main__":
    setup_logging()
    config = ExperimentConfig(
        graph=GraphFamily(kind="complete"),
        m_list=[4, 8, 16, 32],
        instance_count=20,
        algorithms=[
            AlgorithmSpec(name=Algorithm.CENTRAL_MD),
            AlgorithmSpec(name=Algorithm.DSAMD),
            AlgorithmSpec(name=Algorithm.ADSAMD),
            AlgorithmSpec(name=Algorithm.LOCAL_MD),
        ],
        eval=EvalParams(n_eval=20_000),
    )
    result = run_sweep(config)
    emit(result, OUTPUT_PATH / "example")
