import numpy as np
import pytest

from core.consensus import ConsensusMechanismConfig, LatencyConfig
from core.experiment import ExperimentConfig
from core.gossip import FaultConfig
from core.topology import ClusterSet, NodeSet, TopologyConfig, World, build_graph


def world_from_points(points, comm_range=100.0, clusters=ClusterSet()):
    nodes = NodeSet(np.asarray(points, dtype=float))
    return World(nodes, build_graph(nodes, comm_range), clusters)


@pytest.fixture
def make_world():
    return world_from_points


@pytest.fixture
def grid_world():
    """Rejilla 10x10 con paso de 50 m: conexa, cada nodo con sus 4 vecinos."""
    points = [(50.0 * i, 50.0 * j) for i in range(10) for j in range(10)]
    return world_from_points(points, comm_range=60.0)


@pytest.fixture
def layered_world():
    """
    Capas de nodos superpuestos a 90 m de distancia (1, 8, 8, 8, 8 y 17
    nodos): desde el nodo 0 el quórum de 2/3 de 50 se alcanza en la ronda 5.
    """
    sizes = [1, 8, 8, 8, 8, 17]
    points = [(90.0 * layer, 0.0) for layer, size in enumerate(sizes) for _ in range(size)]
    return world_from_points(points, comm_range=100.0)


@pytest.fixture
def small_config():
    """Campo de 200 m con alcance de 300 m: el grafo siempre es completo."""
    return ExperimentConfig(
        topology=TopologyConfig(field_side=0.2, lambda_=1000.0, comm_range=300.0, r_cls=0.0, cluster_side=50.0),
        fault=FaultConfig(p_fail=0.0),
        mechanism=ConsensusMechanismConfig(kind="PoW"),
        latency=LatencyConfig(),
        n_tx=10,
        k_rounds=5,
        repetitions=3,
        seed=11,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
