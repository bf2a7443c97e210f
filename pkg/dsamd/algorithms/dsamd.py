"""Distributed stochastic approximation mirror descent."""

import dataclasses
from functools import partial

from ..config import Algorithm
from ..errors import ConfigError
from ..geometry import MirrorGeometry
from ..models import RateSchedule
from ..network import MixingMatrix, consensus
from ..oracle import GroundTruth, LogisticTask, OracleStream
from .base import AveragedMirrorDescent, ConvergenceTrace, EvalRounds, check_dimensions, node_minibatches
from .schedule import consensus_budget


def stream_for(task: LogisticTask, seed: int | None) -> OracleStream:
    """Sample streams of the task, or of the same task re-keyed to `seed`."""
    if seed is None or seed == task.rng_seed:
        return OracleStream(task)
    return OracleStream(dataclasses.replace(task, rng_seed=seed))


def check_schedule(W: MixingMatrix | None, schedule: RateSchedule) -> None:
    if W is None:
        raise ConfigError("a mixing matrix is required")
    if schedule.r > consensus_budget(schedule.b, schedule.rho):
        raise ConfigError(f"schedule uses r={schedule.r} rounds but only floor(b*rho) fit")
    if schedule.S != schedule.T // schedule.b:
        raise ConfigError(f"schedule has S={schedule.S}, expected floor(T/b)={schedule.T // schedule.b}")


def schedule_metadata(schedule: RateSchedule) -> dict[str, int]:
    metadata = {"b": schedule.b, "r": schedule.r, "discarded": schedule.discarded}
    if schedule.clamped:
        metadata["b_clamped"] = 1
    return metadata


class Dsamd(AveragedMirrorDescent):
    """Mini-batch subgradients, r consensus rounds on them, a prox step from each node's own point."""

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
            name=Algorithm.DSAMD,
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


def run_dsamd(
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
    """Run D-SAMD; gaps of the running averages are filled in when `truth` is given."""
    trace = Dsamd(task, geometry, W, schedule, gamma, stream=stream_for(task, seed), smoothness=smoothness).run(eval_rounds)
    return trace.evaluate(truth) if truth is not None else trace
