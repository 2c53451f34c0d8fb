import networkx as nx
import numpy as np
import pytest
from netutil import net_from_edges, random_net, two_triangles

from citemap.community import (
    Partition,
    brute_force_partition,
    louvain,
    modularity,
    read_partition_csv,
    write_partition_csv,
)
from citemap.simnet import SimilarityNetwork

TRIANGLES = Partition.from_labels([f"v{i}" for i in range(6)], [0, 0, 0, 1, 1, 1])


def test_modularity_cases():
    net = two_triangles(bridge=False)
    assert modularity(net, Partition.from_labels(net.nodes, [0] * 6)) == pytest.approx(0.0, abs=1e-15)
    assert modularity(net, TRIANGLES, weighted=False) == pytest.approx(0.5)
    assert modularity(two_triangles(), TRIANGLES) == pytest.approx(6 / 7 - 1 / 2)


def test_modularity_missing_node():
    with pytest.raises(ValueError):
        modularity(two_triangles(), Partition({"v0": 0}))


def test_modularity_relabel_and_scale_invariance():
    net = two_triangles()
    relabeled = Partition({v: 1 - c for v, c in TRIANGLES.assignment.items()})
    assert modularity(net, relabeled) == pytest.approx(modularity(net, TRIANGLES))
    scaled = SimilarityNetwork(net.nodes, {e: 0.37 for e in net.edges})
    assert modularity(scaled, TRIANGLES) == pytest.approx(modularity(net, TRIANGLES, weighted=False))


def test_modularity_against_networkx():
    rng = np.random.default_rng(5)
    for _ in range(30):
        net = random_net(rng, int(rng.integers(3, 15)))
        if not net.edges:
            continue
        labels = rng.integers(0, 3, net.n_nodes)
        p = Partition.from_labels(net.nodes, labels)
        g = nx.Graph()
        g.add_nodes_from(net.nodes)
        g.add_weighted_edges_from((net.nodes[i], net.nodes[j], w) for (i, j), w in net.edges.items())
        expected = nx.community.modularity(g, p.communities(), weight="weight")
        assert modularity(net, p) == pytest.approx(expected, abs=1e-12)


def test_louvain_two_triangles():
    net = two_triangles()
    assert louvain(net, seed=3).same_grouping(TRIANGLES)


def test_louvain_edgeless_and_complete():
    assert louvain(net_from_edges(4, []), seed=0).n_communities == 4
    k5 = net_from_edges(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])
    assert louvain(k5, seed=0).n_communities == 1


def test_louvain_deterministic_and_not_worse_than_singletons():
    rng = np.random.default_rng(9)
    for s in range(10):
        net = random_net(rng, 20, p=0.3)
        p1, p2 = louvain(net, seed=s), louvain(net, seed=s)
        assert p1 == p2
        assert modularity(net, p1) >= modularity(net, Partition.singletons(net.nodes)) - 1e-12


def test_louvain_unweighted_flag():
    net = two_triangles()
    heavy = SimilarityNetwork(net.nodes, {**net.edges, (2, 3): 50.0})
    assert not louvain(heavy, weighted=True).same_grouping(TRIANGLES)
    assert louvain(heavy, weighted=False).same_grouping(TRIANGLES)


def test_louvain_planted_blocks():
    rng = np.random.default_rng(2)
    edges, weights = [], []
    for i in range(30):
        for j in range(i + 1, 30):
            same = i // 10 == j // 10
            if rng.random() < (0.8 if same else 0.05):
                edges.append((i, j))
                weights.append(1.0)
    p = louvain(net_from_edges(30, edges, weights), seed=0)
    truth = Partition.from_labels([f"v{i}" for i in range(30)], [i // 10 for i in range(30)])
    assert p.same_grouping(truth)


def test_brute_force_cases():
    p, q = brute_force_partition(two_triangles(bridge=False), weighted=False)
    assert q == pytest.approx(0.5) and p.same_grouping(TRIANGLES)
    p, q = brute_force_partition(net_from_edges(2, [(0, 1)]))
    assert p.n_communities == 1 and q == pytest.approx(0.0, abs=1e-15)
    p, _ = brute_force_partition(net_from_edges(3, [(0, 1), (1, 2), (0, 2)]))
    assert p.n_communities == 1


def test_brute_force_guard():
    with pytest.raises(ValueError):
        brute_force_partition(net_from_edges(11, []))


def test_brute_force_matches_direct_enumeration():
    rng = np.random.default_rng(4)
    net = random_net(rng, 6)
    _, q = brute_force_partition(net)
    best = -1.0
    for labels in np.ndindex(*(6,) * 6):
        best = max(best, modularity(net, Partition.from_labels(net.nodes, labels)))
    assert q == pytest.approx(best, abs=1e-12)


def test_partition_csv_roundtrip(tmp_path):
    write_partition_csv(TRIANGLES, list(TRIANGLES.assignment), tmp_path / "p.csv")
    nodes, p = read_partition_csv(tmp_path / "p.csv")
    assert p == TRIANGLES and nodes == [f"v{i}" for i in range(6)]
