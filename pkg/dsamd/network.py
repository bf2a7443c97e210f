"""Graph topologies, mixing matrices and averaging consensus."""

from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np
from loguru import logger
from numpy.typing import NDArray

from .config import LAMBDA2_ZERO_TOL, MAX_GRAPH_RETRIES, MixingRule
from .errors import EmitError, GraphGenerationError, ParameterError, RuleMismatchError, ShapeError
from .models import GraphFamily

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph on nodes 0..m-1. Self-loops are implicit in the mixing weights."""

    m: int
    edges: frozenset[tuple[int, int]]
    family: str
    attempts: int = 1

    @classmethod
    def from_graph(cls, graph: nx.Graph, family: str, attempts: int = 1) -> "Topology":
        edges = frozenset((min(i, j), max(i, j)) for i, j in graph.edges() if i != j)
        return cls(m=graph.number_of_nodes(), edges=edges, family=family, attempts=attempts)

    @classmethod
    def single_node(cls) -> "Topology":
        return cls(m=1, edges=frozenset(), family="complete")

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.m))
        graph.add_edges_from(sorted(self.edges))
        return graph

    def adjacency(self) -> NDArray[np.float64]:
        A = np.zeros((self.m, self.m))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A

    def degrees(self) -> NDArray[np.int64]:
        return self.adjacency().sum(axis=1).astype(np.int64)

    @property
    def is_complete(self) -> bool:
        return len(self.edges) == self.m * (self.m - 1) // 2

    def is_connected(self) -> bool:
        return self.m == 1 or nx.is_connected(self.to_networkx())


def _sample_until_connected(draw, family: str, m: int, rng: np.random.Generator) -> Topology:
    for attempt in range(1, MAX_GRAPH_RETRIES + 1):
        try:
            graph = draw(int(rng.integers(2**32)))
        except nx.NetworkXError as e:
            logger.debug(f"{family} draw {attempt} rejected: {e}")
            continue
        if nx.is_connected(graph):
            if attempt > 1:
                logger.debug(f"{family} graph on {m} nodes connected after {attempt} draws")
            return Topology.from_graph(graph, family, attempts=attempt)
    raise GraphGenerationError(f"no connected {family} graph on {m} nodes after {MAX_GRAPH_RETRIES} draws")


def generate_topology(family: GraphFamily, m: int, rng_seed: int) -> Topology:
    """Generate a connected graph of the requested family.

    Args:
        family: Graph family and its parameters
        m: Number of nodes
        rng_seed: Seed for the random families

    Returns:
        A connected topology; random families record how many draws were needed
    """
    if m < 2:
        raise ParameterError(f"a network needs at least 2 nodes, got {m}")
    rng = np.random.default_rng(rng_seed)

    if family.kind == "complete":
        return Topology.from_graph(nx.complete_graph(m), "complete")
    if family.kind == "path":
        return Topology.from_graph(nx.path_graph(m), "path")
    if family.kind == "ring":
        if m < 3:
            raise ParameterError("a ring needs at least 3 nodes")
        return Topology.from_graph(nx.cycle_graph(m), "ring")
    if family.kind == "k_regular":
        k = family.k
        if k is None or not 1 <= k < m or (k * m) % 2:
            raise ParameterError(f"no {k}-regular graph on {m} nodes")
        # pairing model with rejection of self-edges and multi-edges
        return _sample_until_connected(lambda seed: nx.random_regular_graph(k, m, seed=seed), f"{k}-regular", m, rng)
    if family.kind == "erdos_renyi":
        p = family.p
        if p is None or not 0.0 < p <= 1.0:
            raise ParameterError(f"edge probability must lie in (0, 1], got {p}")
        return _sample_until_connected(lambda seed: nx.gnp_random_graph(m, p, seed=seed), "erdos_renyi", m, rng)
    raise ParameterError(f"unknown graph family {family.kind!r}")


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    weights: NDArray[np.float64]
    lambda2: float
    spectral_gap: float
    rule: MixingRule

    @property
    def m(self) -> int:
        return self.weights.shape[0]


def second_eigenvalue_magnitude(weights: NDArray[np.float64]) -> float:
    """Largest eigenvalue magnitude of W restricted to the complement of the consensus direction."""
    m = weights.shape[0]
    deviation = weights - np.full((m, m), 1.0 / m)
    value = float(np.abs(np.linalg.eigvalsh(deviation)).max())
    return 0.0 if value < LAMBDA2_ZERO_TOL else value


def _validate(weights: NDArray[np.float64], topology: Topology) -> None:
    if not np.array_equal(weights, weights.T):
        raise ParameterError("mixing matrix is not symmetric")
    if np.abs(weights.sum(axis=1) - 1.0).max() > ROW_SUM_TOL or np.abs(weights.sum(axis=0) - 1.0).max() > ROW_SUM_TOL:
        raise ParameterError("mixing matrix is not doubly stochastic")
    allowed = topology.adjacency() + np.eye(topology.m)
    if np.any(weights[allowed == 0] != 0.0):
        raise ParameterError("mixing matrix puts weight on a non-edge")
    if np.any(np.diag(weights) <= 0.0):
        raise ParameterError("mixing matrix has a non-positive diagonal entry")


def build_mixing_matrix(topology: Topology, rule: MixingRule | str) -> MixingMatrix:
    """Build a symmetric doubly-stochastic mixing matrix consistent with the graph.

    Args:
        topology: Connected topology
        rule: mean_for_complete (11^T/m, complete graphs only), metropolis or max_degree

    Returns:
        The mixing matrix with its spectral data
    """
    rule = MixingRule(rule)
    if not topology.is_connected():
        raise ParameterError("mixing needs a connected topology")
    m = topology.m
    A = topology.adjacency()
    degrees = A.sum(axis=1)

    if rule == MixingRule.MEAN_FOR_COMPLETE:
        if not topology.is_complete:
            raise RuleMismatchError(f"mean mixing needs a complete graph, got {topology.family}")
        weights = np.full((m, m), 1.0 / m)
    elif rule == MixingRule.METROPOLIS:
        upper = np.triu(A, 1) / (1.0 + np.maximum.outer(degrees, degrees))
        weights = upper + upper.T
        np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))
    else:
        weights = np.eye(m) - (np.diag(degrees) - A) / (1.0 + degrees.max())

    _validate(weights, topology)
    lambda2 = second_eigenvalue_magnitude(weights)
    if lambda2 >= 1.0:
        raise ParameterError(f"lambda2 = {lambda2} leaves no spectral gap")
    logger.debug(f"{rule.value} mixing on {topology.family} graph (m={m}): lambda2={lambda2:.6f}")
    return MixingMatrix(weights=weights, lambda2=lambda2, spectral_gap=1.0 - lambda2, rule=rule)


def consensus_round(W: MixingMatrix, values: NDArray[np.float64]) -> NDArray[np.float64]:
    """One round of neighbourhood averaging: row i becomes sum_j w_ij values_j."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != W.m:
        raise ShapeError(f"expected {W.m} rows, got {values.shape[0]}")
    return W.weights @ values


def consensus(W: MixingMatrix, values: NDArray[np.float64], r: int) -> NDArray[np.float64]:
    for _ in range(r):
        values = consensus_round(W, values)
    return values


def _deviation(values: NDArray[np.float64]) -> float:
    return float(np.linalg.norm(values - values.mean(axis=0)))


def consensus_error_decay(W: MixingMatrix, values: NDArray[np.float64], r: int) -> list[float]:
    """Frobenius deviation from the node average for q = 0, ..., r rounds.

    Returns r + 1 values: entry 0 is the deviation of `values` itself, entry q the
    deviation after q rounds.
    """
    values = np.asarray(values, dtype=float)
    decay = [_deviation(values)]
    for _ in range(r):
        values = consensus_round(W, values)
        decay.append(_deviation(values))
    return decay


def write_edge_list(topology: Topology, path: Path) -> None:
    """Export edges as one "i j" pair per line."""
    try:
        nx.write_edgelist(topology.to_networkx(), path, data=False)
    except OSError as e:
        raise EmitError(path, str(e)) from e
