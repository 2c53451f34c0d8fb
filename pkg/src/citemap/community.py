"""Modularity, Louvain community detection and an exhaustive optimum for small graphs."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .simnet import SimilarityNetwork

MAX_BRUTE_FORCE_NODES = 10


@dataclass(frozen=True)
class Partition:
    """Node -> community id, ids dense from 0 in order of first appearance."""

    assignment: Mapping[str, int]

    @classmethod
    def from_labels(cls, nodes: Sequence[str], labels: Sequence[int]) -> "Partition":
        remap: dict[int, int] = {}
        out = {}
        for v, c in zip(nodes, labels):
            out[v] = remap.setdefault(int(c), len(remap))
        return cls(out)

    @classmethod
    def singletons(cls, nodes: Sequence[str]) -> "Partition":
        return cls({v: i for i, v in enumerate(nodes)})

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def labels(self, nodes: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.assignment[v] for v in nodes], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"node {exc.args[0]!r} missing from partition") from None

    def communities(self) -> list[set[str]]:
        groups: dict[int, set[str]] = {}
        for v, c in self.assignment.items():
            groups.setdefault(c, set()).add(v)
        return [groups[c] for c in sorted(groups)]

    def same_grouping(self, other: "Partition") -> bool:
        return sorted(map(sorted, self.communities())) == sorted(map(sorted, other.communities()))


def modularity(net: SimilarityNetwork, p: Partition, weighted: bool = True, resolution: float = 1.0) -> float:
    labels = p.labels(net.nodes)
    return _modularity_labels(net.adjacency(weighted), labels, resolution)


def _modularity_labels(a: np.ndarray, labels: np.ndarray, resolution: float = 1.0) -> float:
    two_w = a.sum()
    if two_w == 0:
        return 0.0
    k = a.sum(axis=1)
    q = 0.0
    for c in np.unique(labels):
        mask = labels == c
        q += a[np.ix_(mask, mask)].sum() / two_w - resolution * (k[mask].sum() / two_w) ** 2
    return float(q)


def _csr(a: np.ndarray):
    """CSR arrays of a symmetric matrix (diagonal kept; the kernel skips it)."""
    rows, cols = np.nonzero(a)
    indptr = np.zeros(a.shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return (
        np.cumsum(indptr).astype(np.int64),
        cols.astype(np.int64),
        np.ascontiguousarray(a[rows, cols], dtype=np.float64),
    )


def louvain(
    net: SimilarityNetwork,
    seed: int = 0,
    weighted: bool = True,
    resolution: float = 1.0,
    n_starts: int = 10,
    n_kicks: int = 30,
) -> Partition:
    """Two-phase greedy modularity optimization (local moving, then aggregation).

    Node visit order at every level is a permutation drawn from ``seed``.
    Once the hierarchy converges, the partition is refined by local moving on
    the original graph and, if that moved anything, aggregated again; this
    repeats until a refinement sweep makes no move.

    The converged partition is then polished with a Kernighan-Lin style
    vertex mover, which can escape local optima that single improving moves
    cannot. The whole procedure is run ``n_starts`` times with visit orders spawned
    from ``seed``; the highest-modularity result is kept (earliest start on
    ties), so the output is deterministic for a fixed seed.

    Finally ``n_kicks`` rounds of iterated local search perturb the best
    partition (up to a quarter of the nodes sent to random communities),
    re-run the Louvain levels and the vertex mover on it, and keep the result
    only on strict improvement. This matters on graphs with little structure,
    where every restart can land in the same shallow basin.
    """
    if net.n_nodes < 1:
        raise ValueError("empty network")
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    a0 = net.adjacency(weighted)
    m2 = float(a0.sum())
    if m2 == 0:
        return Partition.singletons(net.nodes)
    best_labels, best_q = None, -np.inf
    for child in np.random.SeedSequence(seed).spawn(n_starts):
        labels = _louvain_once(a0, m2, resolution, np.random.default_rng(child))
        labels = _vertex_mover(a0, labels, resolution)
        q = _modularity_labels(a0, labels, resolution)
        if q > best_q + 1e-12:
            best_labels, best_q = labels, q
    best_labels, _ = _kick(a0, best_labels, best_q, resolution, n_kicks, np.random.default_rng([seed, n_starts]))
    return Partition.from_labels(net.nodes, best_labels)


def _kick(a0, labels, q, resolution, n_kicks, rng):
    n = a0.shape[0]
    m2 = float(a0.sum())
    if n < 3:
        return labels, q
    top = max(2, n // 4)
    for _ in range(n_kicks):
        trial = labels.copy()
        picked = rng.choice(n, size=int(rng.integers(1, top + 1)), replace=False)
        trial[picked] = rng.integers(0, int(labels.max()) + 2, picked.size)
        _, trial = np.unique(trial, return_inverse=True)
        trial = _multilevel(a0, trial.astype(np.int64), m2, resolution, rng)
        trial = _vertex_mover(a0, trial, resolution)
        tq = _modularity_labels(a0, trial, resolution)
        if tq > q + 1e-12:
            labels, q = trial, tq
    return labels, q


def _louvain_once(a0, m2, resolution, rng) -> np.ndarray:
    n0 = a0.shape[0]
    csr0 = _csr(a0)
    strength0 = a0.sum(axis=1)
    labels = np.arange(n0, dtype=np.int64)
    for _ in range(100):
        labels = _multilevel(a0, labels, m2, resolution, rng)
        tot = np.zeros(n0)
        np.add.at(tot, labels, strength0)
        order = rng.permutation(n0).astype(np.int64)
        if kernels.local_move(*csr0, strength0, order, labels, tot, m2, resolution) == 0:
            break
        _, labels = np.unique(labels, return_inverse=True)
        labels = labels.astype(np.int64)
    return labels


def _vertex_mover(a: np.ndarray, labels: np.ndarray, resolution: float = 1.0, max_passes: int = 50) -> np.ndarray:
    """Kernighan-Lin refinement: move every node once, best move first (even if
    negative), then roll back to the best partition seen; repeat while it helps."""
    n = a.shape[0]
    a = a.copy()
    np.fill_diagonal(a, 0.0)
    m2 = a.sum() + 0.0
    k = a.sum(axis=1)
    labels = labels.astype(np.int64).copy()
    cur_q = _modularity_labels(a, labels, resolution)
    for _ in range(max_passes):
        onehot = np.zeros((n, n))
        onehot[np.arange(n), labels] = 1.0
        kin = a @ onehot  # node -> community link weight
        tot = k @ onehot
        work = labels.copy()
        moved = np.zeros(n, dtype=bool)
        q = best_q = cur_q
        best = work.copy()
        rows = np.arange(n)
        for _step in range(n):
            own = work
            tot_own = tot[own] - k
            gain = 2.0 * (kin - kin[rows, own][:, None]) / m2 - 2.0 * resolution * k[:, None] * (
                tot[None, :] - tot_own[:, None]
            ) / (m2 * m2)
            gain[rows, own] = -np.inf
            gain[moved] = -np.inf
            flat = int(np.argmax(gain))
            i, d = divmod(flat, n)
            c = work[i]
            q += gain[i, d]
            kin[:, c] -= a[:, i]
            kin[:, d] += a[:, i]
            tot[c] -= k[i]
            tot[d] += k[i]
            work[i] = d
            moved[i] = True
            if q > best_q + 1e-12:
                best_q = q
                best = work.copy()
        if best_q <= cur_q + 1e-12:
            break
        _, labels = np.unique(best, return_inverse=True)
        labels = labels.astype(np.int64)
        cur_q = _modularity_labels(a, labels, resolution)
    return labels


def _aggregate(a: np.ndarray, comm: np.ndarray, k: int) -> np.ndarray:
    onehot = np.zeros((a.shape[0], k))
    onehot[np.arange(a.shape[0]), comm] = 1.0
    return onehot.T @ a @ onehot


def _multilevel(a0, labels, m2, resolution, rng) -> np.ndarray:
    """Louvain levels starting from ``labels`` (dense ids) on the original graph."""
    membership = labels.copy()
    a = _aggregate(a0, membership, int(membership.max()) + 1)
    while True:
        n = a.shape[0]
        strength = a.sum(axis=1)
        comm = np.arange(n, dtype=np.int64)
        tot = strength.copy()
        order = rng.permutation(n).astype(np.int64)
        moves = kernels.local_move(*_csr(a), strength, order, comm, tot, m2, resolution)
        _, comm = np.unique(comm, return_inverse=True)
        membership = comm[membership].astype(np.int64)
        k = int(comm.max()) + 1
        if moves == 0 or k == n:
            return membership
        a = _aggregate(a, comm, k)


@lru_cache(maxsize=None)
def _restricted_growth_strings(n: int) -> np.ndarray:
    """All set partitions of n items as label arrays, in lexicographic order."""
    out = []
    labels = [0] * n

    def rec(i: int, top: int) -> None:
        if i == n:
            out.append(labels.copy())
            return
        for c in range(top + 2):
            labels[i] = c
            rec(i + 1, max(top, c))

    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    labels[0] = 0
    rec(1, 0)
    return np.array(out, dtype=np.int8)


def brute_force_partition(net: SimilarityNetwork, weighted: bool = True) -> tuple[Partition, float]:
    """Exact modularity maximum by enumerating every set partition."""
    n = net.n_nodes
    if n > MAX_BRUTE_FORCE_NODES:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_NODES} nodes, got {n}")
    if n == 0:
        raise ValueError("empty network")
    a = net.adjacency(weighted)
    two_w = a.sum()
    parts = _restricted_growth_strings(n)
    if two_w == 0:
        return Partition.from_labels(net.nodes, parts[0]), 0.0
    k = a.sum(axis=1) / two_w
    q = np.empty(len(parts))
    for start in range(0, len(parts), 8192):
        lab = parts[start : start + 8192].astype(np.int64)
        same = lab[:, :, None] == lab[:, None, :]
        inside = (same * a).sum(axis=(1, 2)) / two_w
        onehot = lab[:, :, None] == np.arange(n)[None, None, :]
        tot = (onehot * k[None, :, None]).sum(axis=1)
        q[start : start + len(lab)] = inside - (tot**2).sum(axis=1)
    best = int(np.argmax(q))
    return Partition.from_labels(net.nodes, parts[best]), float(q[best])


def write_partition_csv(p: Partition, nodes: Sequence[str], path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["venue", "community"])
        for v in nodes:
            w.writerow([v, p.assignment[v]])


def read_partition_csv(path: str | Path) -> tuple[list[str], Partition]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    nodes = [r["venue"] for r in rows]
    return nodes, Partition({r["venue"]: int(r["community"]) for r in rows})
