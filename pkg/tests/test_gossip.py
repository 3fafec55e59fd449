import networkx as nx
import numpy as np
import pytest

from core.gossip import (FaultConfig, coverage, failed_receivers, propagate, quorum_size, rounds_to_quorum)
from core.topology import Box, ClusterSet, TopologyConfig, build_world, eccentricity
from shared.errors import ConfigError, DisseminationError
from shared.seeding import ROLE_CLUSTERS, ROLE_ROUND, ROLE_TOPOLOGY, stream


def _random_world(index):
    config = TopologyConfig(lambda_=150.0, r_cls=0.5)
    return build_world(config, stream(21, index, ROLE_TOPOLOGY), stream(21, index, ROLE_CLUSTERS))


def test_lossless_gossip_matches_bfs():
    checked = 0
    for index in range(50):
        world = _random_world(index)
        if world.n == 0:
            continue
        source = index % world.n
        trace = propagate(world.graph, world.nodes, world.clusters, source, FaultConfig(p_fail=0.0),
                          stream(21, index, ROLE_ROUND))
        depths = nx.single_source_shortest_path_length(world.graph.to_networkx(), source)
        assert trace.reached_at == depths
        assert trace.rounds_executed == max(depths.values())
        assert len(trace.failed) == 0
        checked += 1
    assert checked == 50


def test_failures_only_inside_clusters(make_world):
    clusters = ClusterSet((Box(170, -10, 20),), 0.0)
    world = make_world([(0, 0), (90, 0), (180, 0), (270, 0)], clusters=clusters)
    trace = propagate(world.graph, world.nodes, world.clusters, 0, FaultConfig(p_fail=1.0),
                      np.random.default_rng(0), faulty=world.faulty)
    assert trace.reached() == {0, 1}
    assert trace.failed_links == [(1, 2, 2)]
    assert trace.delivered_links == [(0, 1, 1)]
    assert trace.rounds_executed == 2
    assert failed_receivers(trace) == {2}
    assert coverage(trace) == pytest.approx(0.5)


def test_faulty_mask_is_computed_when_missing(make_world):
    clusters = ClusterSet((Box(-10, -10, 1000),), 1.0)
    world = make_world([(0, 0), (50, 0), (100, 0)], clusters=clusters)
    trace = propagate(world.graph, world.nodes, world.clusters, 0, FaultConfig(p_fail=1.0),
                      np.random.default_rng(0))
    assert trace.reached() == {0}
    assert {(s, r) for s, r, _ in trace.failed_links} == {(0, 1), (0, 2)}


def test_failed_attempts_are_retried(make_world):
    clusters = ClusterSet((Box(-10, -10, 1000),), 1.0)
    world = make_world([(0, 0)] + [(50, 0)] * 40, clusters=clusters)
    trace = propagate(world.graph, world.nodes, world.clusters, 0, FaultConfig(p_fail=0.5),
                      np.random.default_rng(7))
    assert trace.reached() == set(range(41))
    retried = {r for _, r, k in trace.failed_links if trace.rounds[r] > k}
    assert retried
    for sender, receiver, k in trace.delivered_links:
        assert 0 <= trace.rounds[sender] <= k - 1
        assert trace.rounds[receiver] <= k


def test_propagate_is_deterministic_per_stream():
    world = _random_world(3)
    fault = FaultConfig(p_fail=0.4)
    a = propagate(world.graph, world.nodes, world.clusters, 0, fault, stream(1, 0, ROLE_ROUND, 5))
    b = propagate(world.graph, world.nodes, world.clusters, 0, fault, stream(1, 0, ROLE_ROUND, 5))
    assert np.array_equal(a.rounds, b.rounds)
    assert np.array_equal(a.failed, b.failed)


def test_propagate_rejects_bad_source(make_world):
    world = make_world([(0, 0)])
    with pytest.raises(ValueError):
        propagate(world.graph, world.nodes, world.clusters, 3, FaultConfig(), np.random.default_rng(0))


def test_isolated_source_reaches_only_itself(make_world):
    world = make_world([(0, 0), (500, 500)])
    trace = propagate(world.graph, world.nodes, world.clusters, 0, FaultConfig(p_fail=0.0),
                      np.random.default_rng(0))
    assert trace.reached_at == {0: 0}
    assert trace.rounds_executed == 0


@pytest.mark.parametrize("theta, m, expected", [
    (2 / 3, 3, 2), (2 / 3, 50, 34), (0.7, 10, 7), (1.0, 10, 10), (0.01, 5, 1),
])
def test_quorum_size(theta, m, expected):
    assert quorum_size(theta, m) == expected


def test_full_quorum_takes_eccentricity(grid_world):
    trace = propagate(grid_world.graph, grid_world.nodes, grid_world.clusters, 0, FaultConfig(p_fail=0.0),
                      np.random.default_rng(0))
    everyone = range(grid_world.n)
    assert rounds_to_quorum(trace, everyone, 1.0) == eccentricity(grid_world.graph, 0) == 18
    assert rounds_to_quorum(trace, {0}, 1.0) == 0


def test_quorum_depth_matches_bfs(layered_world):
    trace = propagate(layered_world.graph, layered_world.nodes, layered_world.clusters, 0,
                      FaultConfig(p_fail=0.0), np.random.default_rng(0))
    assert rounds_to_quorum(trace, range(50), 2 / 3) == 5
    assert rounds_to_quorum(trace, range(50), 0.5) == 3


def test_unreached_quorum_raises(make_world):
    world = make_world([(0, 0), (500, 500)])
    trace = propagate(world.graph, world.nodes, world.clusters, 0, FaultConfig(), np.random.default_rng(0))
    with pytest.raises(DisseminationError):
        rounds_to_quorum(trace, {0, 1}, 1.0)


def test_rounds_to_quorum_argument_errors(make_world):
    world = make_world([(0, 0), (50, 0)])
    trace = propagate(world.graph, world.nodes, world.clusters, 0, FaultConfig(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        rounds_to_quorum(trace, set(), 0.5)
    with pytest.raises(ValueError):
        rounds_to_quorum(trace, {0, 1}, 0.0)


def test_fault_config_validation():
    with pytest.raises(ConfigError) as excinfo:
        FaultConfig(p_fail=1.2).validate()
    assert excinfo.value.field == "fault.p_fail"
    with pytest.raises(ConfigError) as excinfo:
        FaultConfig(intermittent="yes").validate()
    assert excinfo.value.field == "fault.intermittent"


def test_faulted_receptions_count_in_basis_only(layered_world):
    trace = propagate(layered_world.graph, layered_world.nodes, layered_world.clusters, 0,
                      FaultConfig(p_fail=0.0), np.random.default_rng(0))
    assert rounds_to_quorum(trace, range(50), 0.5) == 3
    assert rounds_to_quorum(trace, range(50), 0.5, faulted=range(1, 9)) == 4
    with pytest.raises(DisseminationError):
        rounds_to_quorum(trace, range(50), 0.5, faulted=range(1, 50))


@pytest.fixture
def crossing_path(make_world):
    """Camino de 10 nodos a 90 m; los nodos 3 a 6 están dentro de un cluster."""
    clusters = ClusterSet((Box(250, -50, 300),), 0.09)
    return make_world([(90.0 * i, 0.0) for i in range(10)], clusters=clusters)


def test_mean_coverage_decreases_with_failure_probability(crossing_path):
    world = crossing_path
    assert world.faulty.tolist() == [False] * 3 + [True] * 4 + [False] * 3
    probabilities = [0.0, 0.25, 0.5, 0.75, 1.0]
    means = []
    for p_fail in probabilities:
        fault = FaultConfig(p_fail=p_fail)
        values = [coverage(propagate(world.graph, world.nodes, world.clusters, 0, fault,
                                     stream(seed, 0, ROLE_ROUND)))
                  for seed in range(500)]
        means.append(float(np.mean(values)))
    # Cada nodo del cluster se cruza con probabilidad 1 - p; tras el cuarto quedan 3 nodos libres.
    expected = [0.3 + 0.1 * sum((1 - p) ** j for j in range(1, 5)) + 0.3 * (1 - p) ** 4 for p in probabilities]
    assert means[0] == 1.0
    assert means[-1] == pytest.approx(0.3)
    assert all(later <= earlier + 1e-3 for earlier, later in zip(means, means[1:]))
    assert means == pytest.approx(expected, abs=0.03)
