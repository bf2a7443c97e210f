"""Shared mirror-descent engine for the distributed algorithms and their baselines."""

from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..config import Algorithm
from ..errors import ConfigError, ParameterError
from ..geometry import MirrorGeometry
from ..models import TraceRecord
from ..oracle import GroundTruth, OracleStream, batch_gradients, evaluate_gap

Points = NDArray[np.float64]
GradientSource = Callable[[int, Points], Points]
Mixer = Callable[[Points], Points]
EvalRounds = Literal["all", "final"]


def node_minibatches(stream: OracleStream, m: int, b: int) -> GradientSource:
    """theta_i(s): node i averages its own samples t in ((s - 1) b, s b] at its point."""

    def gradients(s: int, points: Points) -> Points:
        features, labels = stream.window(range(m), (s - 1) * b + 1, b)
        return batch_gradients(points, features, labels)

    return gradients


def pooled_minibatches(stream: OracleStream, m: int, b: int) -> GradientSource:
    """One virtual node averaging all m streams over t in ((s - 1) b, s b]."""

    def gradients(s: int, points: Points) -> Points:
        features, labels = stream.window(range(m), (s - 1) * b + 1, b)
        return batch_gradients(points, features.reshape(1, m * b, -1), labels.reshape(1, m * b))

    return gradients


def last_sample_of_period(stream: OracleStream, m: int, period: int) -> GradientSource:
    """Each node keeps only the sample arriving with the communication round, t = s * period."""

    def gradients(s: int, points: Points) -> Points:
        features, labels = stream.window(range(m), s * period, 1)
        return batch_gradients(points, features, labels)

    return gradients


@dataclass(eq=False)
class DsamdState:
    x: Points
    x_av: Points
    s: int = 1


@dataclass(eq=False)
class AdsamdState:
    x: Points
    x_md: Points
    x_ag: Points
    s: int = 1

    @property
    def beta(self) -> float:
        return (self.s + 1) / 2

    def gamma_s(self, gamma: float) -> float:
        return gamma * (self.s + 1) / 2


@dataclass(eq=False)
class ConvergenceTrace:
    """Reported iterates (and, once evaluated, gaps) at the recorded rounds of one run."""

    algorithm: Algorithm
    gamma: float
    rounds: list[int] = field(default_factory=list)
    samples: list[int] = field(default_factory=list)
    reported: list[Points] = field(default_factory=list)
    search_points: list[Points] = field(default_factory=list)
    node_gaps: list[NDArray[np.float64]] = field(default_factory=list)
    metadata: dict[str, str | int | float] = field(default_factory=dict)

    def record(self, s: int, samples: int, reported: Points, search_points: Points) -> None:
        self.rounds.append(s)
        self.samples.append(samples)
        self.reported.append(reported.copy())
        self.search_points.append(search_points.copy())

    def evaluate(self, truth: GroundTruth) -> "ConvergenceTrace":
        self.node_gaps = [np.asarray(evaluate_gap(truth, rows)) for rows in self.reported]
        return self

    @property
    def mean_gaps(self) -> list[float]:
        return [float(gaps.mean()) for gaps in self.node_gaps]

    @property
    def final_gap(self) -> float:
        return self.mean_gaps[-1]

    def to_record(self, per_node: bool = False) -> TraceRecord:
        return TraceRecord(
            algorithm=self.algorithm,
            gamma=self.gamma,
            rounds=self.rounds,
            samples=self.samples,
            mean_gaps=self.mean_gaps,
            node_gaps=[gaps.tolist() for gaps in self.node_gaps] if per_node else [],
            metadata=self.metadata,
        )


class MirrorDescentEngine(ABC):
    """Stochastic mirror descent over node-stacked iterates.

    Every round draws subgradients at the query points, optionally mixes them
    (consensus on gradients), takes a row-wise prox step and optionally mixes
    the new search points (consensus on points).
    """

    def __init__(
        self,
        name: Algorithm,
        geometry: MirrorGeometry,
        gamma: float,
        nodes: int,
        rounds: int,
        samples_per_round: int,
        gradients: GradientSource,
        gradient_mixing: Mixer | None = None,
        point_mixing: Mixer | None = None,
        smoothness: float | None = None,
        metadata: dict[str, str | int | float] | None = None,
    ) -> None:
        if gamma < 0 or not np.isfinite(gamma):
            raise ParameterError(f"step size must be finite and nonnegative, got {gamma}")
        if nodes < 1 or rounds < 0:
            raise ConfigError(f"invalid engine size nodes={nodes}, rounds={rounds}")
        if smoothness and gamma > geometry.alpha / (2 * smoothness):
            logger.warning(f"{name.value}: gamma={gamma} exceeds alpha/(2L)={geometry.alpha / (2 * smoothness):.4g}")
        self.name = name
        self.geometry = geometry
        self.gamma = gamma
        self.nodes = nodes
        self.rounds = rounds
        self.samples_per_round = samples_per_round
        self.gradients = gradients
        self.gradient_mixing = gradient_mixing
        self.point_mixing = point_mixing
        self.metadata = metadata or {}

    def _mix_gradients(self, h: Points) -> Points:
        return self.gradient_mixing(h) if self.gradient_mixing is not None else h

    def _prox_step(self, x: Points, step: float, h: Points) -> Points:
        x_next = self.geometry.prox_rows(x, step * h)
        return self.point_mixing(x_next) if self.point_mixing is not None else x_next

    def _start(self) -> Points:
        return np.tile(self.geometry.minimizer(), (self.nodes, 1))

    @abstractmethod
    def initial_state(self) -> DsamdState | AdsamdState: ...

    @abstractmethod
    def step(self, state: DsamdState | AdsamdState) -> None: ...

    @abstractmethod
    def reported(self, state: DsamdState | AdsamdState) -> Points: ...

    def run(self, eval_rounds: EvalRounds = "final") -> ConvergenceTrace:
        """Execute all rounds, recording the reported iterate after every round or only the last."""
        state = self.initial_state()
        trace = ConvergenceTrace(algorithm=self.name, gamma=self.gamma, metadata=dict(self.metadata))
        if self.rounds == 0:
            trace.record(0, 0, self.reported(state), state.x)
        for s in range(1, self.rounds + 1):
            self.step(state)
            if eval_rounds == "all" or s == self.rounds:
                trace.record(s, s * self.samples_per_round, self.reported(state), state.x)
        logger.debug(f"{self.name.value}: {self.rounds} rounds on {self.nodes} node(s)")
        return trace


class AveragedMirrorDescent(MirrorDescentEngine):
    """Constant-step mirror descent reporting the running average of the prox iterates."""

    def initial_state(self) -> DsamdState:
        x = self._start()
        return DsamdState(x=x, x_av=x.copy())

    def step(self, state: DsamdState) -> None:
        # x_av(s + 1) averages x(1), ..., x(s)
        state.x_av = state.x_av + (state.x - state.x_av) / state.s
        h = self._mix_gradients(self.gradients(state.s, state.x))
        state.x = self._prox_step(state.x, self.gamma, h)
        state.s += 1

    def reported(self, state: DsamdState) -> Points:
        return state.x_av


class AcceleratedMirrorDescent(MirrorDescentEngine):
    """Accelerated mirror descent with beta_s = (s + 1) / 2 and gamma_s = gamma (s + 1) / 2."""

    def initial_state(self) -> AdsamdState:
        x = self._start()
        return AdsamdState(x=x, x_md=x.copy(), x_ag=x.copy())

    def step(self, state: AdsamdState) -> None:
        inv_beta = 1.0 / state.beta
        state.x_md = inv_beta * state.x + (1.0 - inv_beta) * state.x_ag
        h = self._mix_gradients(self.gradients(state.s, state.x_md))
        state.x = self._prox_step(state.x, state.gamma_s(self.gamma), h)
        state.x_ag = inv_beta * state.x + (1.0 - inv_beta) * state.x_ag
        state.s += 1

    def reported(self, state: AdsamdState) -> Points:
        return state.x_ag


def check_dimensions(geometry: MirrorGeometry, n: int) -> None:
    if geometry.dimension != n:
        raise ConfigError(f"geometry has dimension {geometry.dimension}, the task needs {n}")
