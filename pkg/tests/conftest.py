import numpy as np
import pytest

from dsamd.config import MixingRule
from dsamd.geometry import EuclideanGeometry, FeasibleSet
from dsamd.models import GraphFamily
from dsamd.network import Topology, build_mixing_matrix, generate_topology
from dsamd.oracle import LogisticTask, build_ground_truth


@pytest.fixture
def task():
    return LogisticTask.from_seed(7, dimension=3)


@pytest.fixture
def geometry(task):
    return EuclideanGeometry(FeasibleSet.ball(np.zeros(task.n), 100.0))


@pytest.fixture
def truth(task, geometry):
    return build_ground_truth(task, 2_000, geometry.domain)


@pytest.fixture
def complete4():
    return build_mixing_matrix(generate_topology(GraphFamily(kind="complete"), 4, 0), MixingRule.MEAN_FOR_COMPLETE)


@pytest.fixture
def path3():
    return build_mixing_matrix(generate_topology(GraphFamily(kind="path"), 3, 0), MixingRule.METROPOLIS)


@pytest.fixture
def single_node():
    return build_mixing_matrix(Topology.single_node(), MixingRule.MEAN_FOR_COMPLETE)
