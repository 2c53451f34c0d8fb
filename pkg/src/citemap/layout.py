"""Stress-majorization layouts of venue maps, per window and smoothed over time.

Static frames minimize weighted raw stress (the Kamada-Kawai energy with
SMACOF updates). Dynamic frames add ``alpha * sum |x_v - anchor_v|^2`` where
the anchor is the venue's mean position over the preceding frames.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .simnet import SimilarityMatrix

LOW_WEIGHT = 0.1


@dataclass
class DissimilarityMatrix:
    venues: list[str]
    values: np.ndarray
    weights: np.ndarray | None = None
    label: int | None = None

    def weight_matrix(self) -> np.ndarray:
        w = np.ones_like(self.values) if self.weights is None else np.array(self.weights, dtype=float)
        np.fill_diagonal(w, 0.0)
        return w


@dataclass
class Configuration:
    venues: list[str]
    positions: np.ndarray  # n x 2
    stress_history: list[float] = field(default_factory=list, repr=False)

    @property
    def iterations(self) -> int:
        return max(0, len(self.stress_history) - 1)

    def aligned(self, venues: Sequence[str]) -> np.ndarray:
        index = {v: i for i, v in enumerate(self.venues)}
        try:
            return self.positions[[index[v] for v in venues]]
        except KeyError as exc:
            raise ValueError(f"venue {exc.args[0]!r} has no position") from None


@dataclass
class LayoutSeries:
    frames: list[tuple[int | None, Configuration]]
    alpha: float
    smooth_span: int
    seeds: list[int] = field(default_factory=list)


def dissimilarity_from_similarity(s: SimilarityMatrix, tau: float | None = None,
                                  low_weight: float = LOW_WEIGHT, label=None) -> DissimilarityMatrix:
    """``1 - cosine``; with ``tau`` set, pairs at or below it get weight ``low_weight``."""
    d = 1.0 - np.asarray(s.values, dtype=float)
    d = np.clip((d + d.T) / 2, 0.0, None)
    np.fill_diagonal(d, 0.0)
    w = None
    if tau is not None:
        w = np.where(s.values > tau, 1.0, low_weight)
        np.fill_diagonal(w, 0.0)
    return DissimilarityMatrix(list(s.venues), d, w, label)


def raw_stress(d: DissimilarityMatrix, x: np.ndarray) -> float:
    _, s = kernels.stress_terms(np.ascontiguousarray(x, dtype=float),
                                np.ascontiguousarray(d.values, dtype=float),
                                np.ascontiguousarray(d.weight_matrix()))
    return float(s)


def _random_init(d: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    nz = d[d > 0]
    scale = float(nz.mean()) if nz.size else 1.0
    return rng.standard_normal((d.shape[0], 2)) * scale


def _majorize(D, W, x, tol, max_iter, alpha=0.0, anchors=None, mask=None):
    """SMACOF iterations on stress + alpha * anchored squared displacement."""
    n = D.shape[0]
    v = np.diag(W.sum(axis=1)) - W
    anchored = alpha > 0 and mask is not None and mask.any()
    if anchored:
        a = alpha * mask.astype(float)
        m = v + np.diag(a)
        m_inv = np.linalg.inv(m)
        pull = a[:, None] * anchors
    else:
        m_inv = np.linalg.pinv(v)
        pull = 0.0

    def objective(bx_stress, x):
        s = bx_stress
        if anchored:
            s += float((a[:, None] * (x - anchors) ** 2).sum())
        return s

    x = np.ascontiguousarray(x, dtype=float)
    bx, s = kernels.stress_terms(x, D, W)
    history = [objective(s, x)]
    for _ in range(max_iter):
        x = np.ascontiguousarray(m_inv @ (bx + pull))
        if not anchored:
            x -= x.mean(axis=0)
        bx, s = kernels.stress_terms(x, D, W)
        history.append(objective(s, x))
        prev, cur = history[-2], history[-1]
        if cur <= 1e-300 or (prev - cur) <= tol * prev:
            break
    return x, history


def stress_majorization(
    d: DissimilarityMatrix,
    init="random",
    seed: int = 0,
    tol: float = 1e-9,
    max_iter: int = 3000,
) -> Configuration:
    """Static layout. ``init`` is ``"random"`` (seeded), ``"classical"``, a
    :class:`Configuration` or an ``n x 2`` array."""
    D = np.ascontiguousarray(d.values, dtype=float)
    n = D.shape[0]
    if n < 2:
        raise ValueError("need at least 2 venues")
    if n >= 3 and not np.any(D > 0):
        raise ValueError("all dissimilarities are zero")
    if isinstance(init, Configuration):
        x0 = init.aligned(d.venues)
    elif isinstance(init, str) and init == "random":
        x0 = _random_init(D, np.random.default_rng(seed))
    elif isinstance(init, str) and init == "classical":
        x0 = classical_mds(D)
    else:
        x0 = np.asarray(init, dtype=float)
    W = np.ascontiguousarray(d.weight_matrix())
    x, hist = _majorize(D, W, x0, tol, max_iter)
    x = x - x.mean(axis=0)
    return Configuration(list(d.venues), x, hist)


def classical_mds(D: np.ndarray) -> np.ndarray:
    n = D.shape[0]
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ (D**2) @ j
    evals, evecs = np.linalg.eigh(b)
    idx = np.argsort(evals)[::-1][:2]
    return evecs[:, idx] * np.sqrt(np.clip(evals[idx], 0, None))


def kruskal_stress(d: DissimilarityMatrix, c: Configuration) -> float:
    """Stress-1: sqrt(sum (dist - d)^2 / sum d^2) over unordered pairs."""
    num, den = _stress_parts(d, c)
    if den == 0:
        raise ValueError("sum of squared dissimilarities is zero")
    return float(np.sqrt(num / den))


def _stress_parts(d: DissimilarityMatrix, c: Configuration) -> tuple[float, float]:
    x = c.aligned(d.venues)
    iu = np.triu_indices(len(d.venues), k=1)
    dist = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2))[iu]
    target = np.asarray(d.values, dtype=float)[iu]
    return float(((dist - target) ** 2).sum()), float((target**2).sum())


def frame_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, t]).generate_state(1)[0])


def dynamic_layout(
    ds: Sequence[DissimilarityMatrix],
    alpha: float,
    smooth_span: int = 4,
    seed: int = 0,
    tol: float = 1e-9,
    max_iter: int = 3000,
) -> LayoutSeries:
    """Layouts for a sequence of windows, each pulled toward the trailing mean
    of the previous ``smooth_span`` frames with strength ``alpha``.

    With ``alpha == 0`` every frame is the static layout with seed
    ``frame_seed(seed, t)``.
    """
    if not ds:
        raise ValueError("no windows")
    if alpha < 0 or smooth_span < 1:
        raise ValueError("alpha must be >= 0 and smooth_span >= 1")
    frames: list[tuple[int | None, Configuration]] = []
    seeds = []
    for t, d in enumerate(ds):
        s = frame_seed(seed, t)
        seeds.append(s)
        if alpha == 0 or t == 0:
            frames.append((d.label, stress_majorization(d, "random", s, tol, max_iter)))
            continue
        history = [c for _, c in frames[-smooth_span:]]
        n = len(d.venues)
        anchors = np.zeros((n, 2))
        mask = np.zeros(n, dtype=bool)
        for i, v in enumerate(d.venues):
            pts = [c.positions[c.venues.index(v)] for c in history if v in c.venues]
            if pts:
                anchors[i] = np.mean(pts, axis=0)
                mask[i] = True
        x0 = _warm_start(d, anchors, mask, np.random.default_rng(s))
        D = np.ascontiguousarray(d.values, dtype=float)
        W = np.ascontiguousarray(d.weight_matrix())
        x, hist = _majorize(D, W, x0, tol, max_iter, alpha, anchors, mask)
        frames.append((d.label, Configuration(list(d.venues), x, hist)))
    return LayoutSeries(frames, alpha, smooth_span, seeds)


def _warm_start(d: DissimilarityMatrix, anchors, mask, rng) -> np.ndarray:
    """Known venues start at their anchor; new ones at the similarity-weighted
    centroid of anchored neighbors, else at a seeded random point."""
    x0 = anchors.copy()
    sim = 1.0 - np.asarray(d.values, dtype=float)
    if d.weights is not None:
        linked = np.asarray(d.weights) >= 1.0
    else:
        linked = sim > 0
    fallback = _random_init(np.asarray(d.values), rng)
    for i in np.flatnonzero(~mask):
        nb = np.flatnonzero(linked[i] & mask)
        nb = nb[nb != i]
        wts = sim[i, nb]
        if nb.size and wts.sum() > 0:
            x0[i] = (wts[:, None] * anchors[nb]).sum(axis=0) / wts.sum()
        else:
            x0[i] = fallback[i]
    return x0


def aggregated_stress(ls: LayoutSeries, ds: Sequence[DissimilarityMatrix]) -> float:
    """Stress-1 pooled over all frames (summed numerators over summed denominators)."""
    if not ls.frames or not ds:
        raise ValueError("empty layout series")
    if len(ls.frames) != len(ds):
        raise ValueError("frames and dissimilarity matrices do not align")
    num = den = 0.0
    for (_, c), d in zip(ls.frames, ds):
        a, b = _stress_parts(d, c)
        num += a
        den += b
    if den == 0:
        raise ValueError("sum of squared dissimilarities is zero")
    return float(np.sqrt(num / den))


def displacements(ls: LayoutSeries) -> list[np.ndarray]:
    """Per-venue movement between consecutive frames (shared venues only)."""
    out = []
    for (_, a), (_, b) in zip(ls.frames, ls.frames[1:]):
        shared = [v for v in b.venues if v in set(a.venues)]
        if not shared:
            out.append(np.zeros(0))
            continue
        out.append(np.linalg.norm(a.aligned(shared) - b.aligned(shared), axis=1))
    return out


def write_frame(c: Configuration, path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["venue", "x", "y"])
        for v, (x, y) in zip(c.venues, c.positions):
            w.writerow([v, f"{x:.6f}", f"{y:.6f}"])
