"""Accelerated distributed stochastic approximation mirror descent."""

from functools import partial

from ..config import Algorithm
from ..geometry import MirrorGeometry
from ..models import RateSchedule
from ..network import MixingMatrix, consensus
from ..oracle import GroundTruth, LogisticTask, OracleStream
from .base import AcceleratedMirrorDescent, ConvergenceTrace, EvalRounds, check_dimensions, node_minibatches
from .dsamd import check_schedule, schedule_metadata, stream_for


class Adsamd(AcceleratedMirrorDescent):
    """Subgradients are queried at x_md, averaged by consensus, and the prox step starts from x."""

    def __init__(
        self,
        task: LogisticTask,
        geometry: MirrorGeometry,
        W: MixingMatrix,
        schedule: RateSchedule,
        gamma: float,
        stream: OracleStream | None = None,
        smoothness: float | None = None,
    ) -> None:
        check_schedule(W, schedule)
        check_dimensions(geometry, task.n)
        stream = stream or OracleStream(task)
        super().__init__(
            name=Algorithm.ADSAMD,
            geometry=geometry,
            gamma=gamma,
            nodes=W.m,
            rounds=schedule.S,
            samples_per_round=W.m * schedule.b,
            gradients=node_minibatches(stream, W.m, schedule.b),
            gradient_mixing=partial(consensus, W, r=schedule.r),
            smoothness=smoothness,
            metadata=schedule_metadata(schedule),
        )


def run_adsamd(
    task: LogisticTask,
    geometry: MirrorGeometry,
    W: MixingMatrix,
    schedule: RateSchedule,
    gamma: float,
    seed: int | None = None,
    truth: GroundTruth | None = None,
    eval_rounds: EvalRounds = "final",
    smoothness: float | None = None,
) -> ConvergenceTrace:
    trace = Adsamd(task, geometry, W, schedule, gamma, stream=stream_for(task, seed), smoothness=smoothness).run(eval_rounds)
    return trace.evaluate(truth) if truth is not None else trace
