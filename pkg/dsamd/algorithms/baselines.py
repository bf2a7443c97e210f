"""Centralized, local and distributed-gradient-descent baselines."""

import math
from typing import Literal

from ..config import Algorithm
from ..errors import ConfigError
from ..geometry import MirrorGeometry
from ..models import RateSchedule
from ..network import MixingMatrix, consensus_round
from ..oracle import GroundTruth, LogisticTask, OracleStream
from .base import (
    AcceleratedMirrorDescent,
    AveragedMirrorDescent,
    ConvergenceTrace,
    EvalRounds,
    MirrorDescentEngine,
    check_dimensions,
    last_sample_of_period,
    node_minibatches,
    pooled_minibatches,
)
from .dsamd import stream_for

BASELINES = (
    Algorithm.CENTRAL_MD,
    Algorithm.CENTRAL_AMD,
    Algorithm.LOCAL_MD,
    Algorithm.LOCAL_AMD,
    Algorithm.DGD_NAIVE,
    Algorithm.DGD_MINIBATCH,
)
ACCELERATED = (Algorithm.CENTRAL_AMD, Algorithm.LOCAL_AMD)


def dgd_period(rho: float) -> int:
    """Data-acquisition rounds between two communication rounds, ceil(1 / rho)."""
    return max(1, math.ceil(1.0 / rho - 1e-9))


def build_baseline(
    kind: Algorithm,
    task: LogisticTask,
    geometry: MirrorGeometry,
    W: MixingMatrix | None,
    schedule: RateSchedule,
    gamma: float,
    stream: OracleStream,
    m: int | None = None,
    central_batch: Literal["m", "mb"] = "m",
) -> MirrorDescentEngine:
    """Build the engine of a baseline.

    Args:
        kind: One of the six baselines
        task: Logistic task the streams belong to
        geometry: Geometry of the prox steps
        W: Mixing matrix, required by the DGD variants
        schedule: Rate schedule of the run
        gamma: Base step size
        stream: Shared per-node sample streams
        m: Node count when no mixing matrix is given
        central_batch: "m" steps once per data round on the m fresh samples, "mb" once per mini-batch round on m*b samples

    Returns:
        An engine ready to run
    """
    kind = Algorithm(kind)
    if kind not in BASELINES:
        raise ConfigError(f"{kind.value} is not a baseline")
    check_dimensions(geometry, task.n)
    nodes = W.m if W is not None else m
    if nodes is None:
        raise ConfigError(f"{kind.value} needs a node count or a mixing matrix")
    engine_class = AcceleratedMirrorDescent if kind in ACCELERATED else AveragedMirrorDescent

    if kind in (Algorithm.CENTRAL_MD, Algorithm.CENTRAL_AMD):
        batch = schedule.b if central_batch == "mb" else 1
        return engine_class(
            name=kind,
            geometry=geometry,
            gamma=gamma,
            nodes=1,
            rounds=schedule.T // batch,
            samples_per_round=nodes * batch,
            gradients=pooled_minibatches(stream, nodes, batch),
            metadata={"central_batch": central_batch, "batch": nodes * batch},
        )

    if kind in (Algorithm.LOCAL_MD, Algorithm.LOCAL_AMD):
        return engine_class(
            name=kind,
            geometry=geometry,
            gamma=gamma,
            nodes=nodes,
            rounds=schedule.T,
            samples_per_round=nodes,
            gradients=node_minibatches(stream, nodes, 1),
        )

    if W is None:
        raise ConfigError(f"{kind.value} needs a mixing matrix")
    period = dgd_period(schedule.rho)
    rounds = schedule.T // period
    leftover = schedule.T % period
    if kind == Algorithm.DGD_NAIVE:
        gradients = last_sample_of_period(stream, nodes, period)
        # all but the last sample of every period, plus the incomplete tail
        discarded = rounds * (period - 1) + leftover
    else:
        gradients = node_minibatches(stream, nodes, period)
        discarded = leftover
    return AveragedMirrorDescent(
        name=kind,
        geometry=geometry,
        gamma=gamma,
        nodes=nodes,
        rounds=rounds,
        samples_per_round=nodes * period,
        gradients=gradients,
        point_mixing=lambda x: consensus_round(W, x),
        metadata={"period": period, "discarded": discarded},
    )


def run_baseline(
    kind: Algorithm,
    task: LogisticTask,
    geometry: MirrorGeometry,
    W: MixingMatrix | None,
    schedule: RateSchedule,
    gamma: float,
    seed: int | None = None,
    truth: GroundTruth | None = None,
    eval_rounds: EvalRounds = "final",
    m: int | None = None,
    central_batch: Literal["m", "mb"] = "m",
) -> ConvergenceTrace:
    engine = build_baseline(kind, task, geometry, W, schedule, gamma, stream_for(task, seed), m=m, central_batch=central_batch)
    trace = engine.run(eval_rounds)
    return trace.evaluate(truth) if truth is not None else trace
