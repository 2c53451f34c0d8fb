"""Cosine-normalized venue similarity, thresholded networks and their descriptive metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import OccurrenceMatrix


@dataclass
class SimilarityMatrix:
    venues: list[str]
    values: np.ndarray


@dataclass
class SimilarityNetwork:
    """Undirected weighted venue graph. Edge keys are index pairs ``(i, j)`` with ``i < j``."""

    nodes: list[str]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    tau: float | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_edge_endpoints(self) -> int:
        return 2 * len(self.edges)

    def neighbors(self) -> list[set[int]]:
        nb: list[set[int]] = [set() for _ in self.nodes]
        for i, j in self.edges:
            nb[i].add(j)
            nb[j].add(i)
        return nb

    def adjacency(self, weighted: bool = True) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for (i, j), w in self.edges.items():
            a[i, j] = a[j, i] = w if weighted else 1.0
        return a

    def same_as(self, other: "SimilarityNetwork") -> bool:
        return self.nodes == other.nodes and self.edges == other.edges


@dataclass
class NetworkMetrics:
    n_nodes: int
    n_edges: int
    n_edge_endpoints: int
    n_communities: int
    modularity: float
    avg_clustering: float
    density: float


def cosine_matrix(m: OccurrenceMatrix) -> SimilarityMatrix:
    if len(m.cols) < 2:
        raise ValueError("need at least 2 venues for a similarity matrix")
    x = np.asarray(m.cells, dtype=float)
    norms = np.sqrt((x * x).sum(axis=0))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"venue {m.cols[zero[0]]!r} has a zero-norm column")
    unit = x / norms
    values = np.clip(unit.T @ unit, 0.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(list(m.cols), values)


def threshold_network(s: SimilarityMatrix, tau: float) -> SimilarityNetwork:
    """Keep pairs with cosine strictly above ``tau``."""
    if not 0 <= tau < 1:
        raise ValueError("tau must be in [0, 1)")
    iu, ju = np.triu_indices(len(s.venues), k=1)
    vals = s.values[iu, ju]
    keep = vals > tau
    edges = {(int(i), int(j)): float(v) for i, j, v in zip(iu[keep], ju[keep], vals[keep])}
    return SimilarityNetwork(list(s.venues), edges, tau)


def density_from_counts(n_nodes: int, n_edge_endpoints: int) -> float:
    if n_nodes < 2:
        raise ValueError("density needs at least 2 nodes")
    return n_edge_endpoints / (n_nodes * (n_nodes - 1))


def density(net: SimilarityNetwork) -> float:
    return density_from_counts(net.n_nodes, net.n_edge_endpoints)


def local_clustering(net: SimilarityNetwork) -> list[float]:
    nb = net.neighbors()
    out = []
    for v, ns in enumerate(nb):
        k = len(ns)
        if k < 2:
            out.append(0.0)
            continue
        links = sum(len(nb[u] & ns) for u in ns) // 2
        out.append(links / (k * (k - 1) / 2))
    return out


def avg_clustering(net: SimilarityNetwork) -> float:
    """Mean local clustering over all nodes (degree < 2 counts as 0); weights ignored."""
    if net.n_nodes < 1:
        raise ValueError("empty network")
    return float(np.mean(local_clustering(net)))


def write_edge_list(net: SimilarityNetwork, path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "weight"])
        for (i, j), wt in sorted(net.edges.items()):
            w.writerow([net.nodes[i], net.nodes[j], f"{wt:.4f}"])
