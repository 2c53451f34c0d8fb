"""Principal-component factor extraction with Varimax rotation.

Documents are the cases and venues the variables. Loadings are
correlation-scale: column j of the unrotated solution is
``sqrt(eigenvalue_j) * eigenvector_j`` of the Pearson correlation matrix.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import OccurrenceMatrix

PSD_TOL = 1e-8


@dataclass
class CorrelationMatrix:
    venues: list[str]
    values: np.ndarray


@dataclass
class FactorSolution:
    venues: list[str]
    loadings: np.ndarray  # venues x k
    eigenvalues: np.ndarray  # k leading eigenvalues, descending
    pct_variance: float
    rotation: str = "NONE"
    all_eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    def communalities(self) -> np.ndarray:
        return (self.loadings**2).sum(axis=1)

    def row(self, venue: str) -> np.ndarray:
        try:
            return self.loadings[self.venues.index(venue)]
        except ValueError:
            raise KeyError(f"unknown venue {venue!r}") from None


@dataclass
class VarimaxResult:
    loadings: np.ndarray
    rotation: np.ndarray  # k x k orthonormal; loadings = input @ rotation
    criterion: list[float]  # after each sweep, first entry is the start value
    sweeps: int


def correlation(m: OccurrenceMatrix) -> CorrelationMatrix:
    x = np.asarray(m.cells, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("correlation needs at least 2 documents")
    centered = x - x.mean(axis=0)
    sd = np.sqrt((centered**2).sum(axis=0))
    zero = np.flatnonzero(sd == 0)
    if zero.size:
        raise ValueError(f"venue {m.cols[zero[0]]!r} has zero variance")
    z = centered / sd
    r = z.T @ z
    r = (r + r.T) / 2
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(list(m.cols), np.clip(r, -1.0, 1.0))


def _fix_signs(loadings: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive."""
    out = loadings.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def principal_components(c: CorrelationMatrix, k: int) -> FactorSolution:
    p = len(c.venues)
    if not 1 <= k <= p:
        raise ValueError(f"k must be in [1, {p}]")
    evals, evecs = np.linalg.eigh(c.values)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[-1] < -PSD_TOL:
        raise ValueError(f"correlation matrix is not positive semidefinite (min eigenvalue {evals[-1]:.3g})")
    evals = np.clip(evals, 0.0, None)
    loadings = _fix_signs(evecs[:, :k] * np.sqrt(evals[:k]))
    return FactorSolution(
        venues=list(c.venues),
        loadings=loadings,
        eigenvalues=evals[:k].copy(),
        pct_variance=float(100.0 * evals[:k].sum() / p),
        rotation="NONE",
        all_eigenvalues=evals,
    )


def varimax_criterion(loadings: np.ndarray) -> float:
    sq = loadings**2
    return float(((sq**2).mean(axis=0) - sq.mean(axis=0) ** 2).sum())


def varimax_rotation(
    loadings: np.ndarray,
    normalize: bool = True,
    tol: float = 1e-10,
    max_sweeps: int = 100,
) -> VarimaxResult:
    """Varimax by sweeps of pairwise planar rotations (Kaiser's closed-form angle).

    With ``normalize`` the rows are scaled to unit length first and scaled
    back afterwards. Iteration stops when a sweep gains less than ``tol``.
    """
    a = np.asarray(loadings, dtype=float)
    p, k = a.shape
    if k < 2:
        return VarimaxResult(a.copy(), np.eye(k), [varimax_criterion(a)], 0)
    h = np.sqrt((a**2).sum(axis=1))
    scale = np.where(h > 0, h, 1.0) if normalize else np.ones(p)
    b = a / scale[:, None]
    rot = np.eye(k)
    history = [varimax_criterion(b)]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for i in range(k - 1):
            for j in range(i + 1, k):
                x, y = b[:, i], b[:, j]
                u = x * x - y * y
                v = 2 * x * y
                num = 2 * (u @ v - u.sum() * v.sum() / p)
                den = (u @ u - v @ v) - (u.sum() ** 2 - v.sum() ** 2) / p
                theta = np.arctan2(num, den) / 4
                if theta == 0.0:
                    continue
                cs, sn = np.cos(theta), np.sin(theta)
                g = np.array([[cs, -sn], [sn, cs]])
                b[:, [i, j]] = b[:, [i, j]] @ g
                rot[:, [i, j]] = rot[:, [i, j]] @ g
        history.append(varimax_criterion(b))
        if history[-1] - history[-2] < tol:
            break
    return VarimaxResult(b * scale[:, None], rot, history, sweeps)


def varimax(loadings: np.ndarray, normalize: bool = True) -> np.ndarray:
    return varimax_rotation(loadings, normalize=normalize).loadings


def rotate(sol: FactorSolution, normalize: bool = True) -> FactorSolution:
    if sol.rotation == "VARIMAX":
        return sol
    rotated = _fix_signs(varimax(sol.loadings, normalize=normalize))
    return replace(sol, loadings=rotated, rotation="VARIMAX")


def interfactorial_complexity(sol: FactorSolution, venue: str, load_threshold: float) -> int:
    """Number of factors on which ``venue`` loads at least ``load_threshold`` in absolute value."""
    if load_threshold <= 0:
        raise ValueError("load_threshold must be > 0")
    return int((np.abs(sol.row(venue)) >= load_threshold).sum())


def write_scree(sol: FactorSolution, path: str | Path) -> None:
    from .exporters import atomic_writer

    evals = sol.all_eigenvalues if sol.all_eigenvalues is not None else sol.eigenvalues
    p = len(sol.venues)
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "eigenvalue", "pct_variance", "cumulative_pct"])
        cum = 0.0
        for i, e in enumerate(evals, 1):
            pct = 100.0 * e / p
            cum += pct
            w.writerow([i, f"{e:.6f}", f"{pct:.3f}", f"{cum:.3f}"])


def write_loadings(sol: FactorSolution, path: str | Path) -> None:
    """Loadings CSV (3 decimals) with the % variance explained in a leading row."""
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pct_variance_explained", f"{sol.pct_variance:.1f}", sol.rotation])
        w.writerow(["venue"] + [f"F{j + 1}" for j in range(sol.k)])
        for v, row in zip(sol.venues, sol.loadings):
            w.writerow([v] + [_fmt3(x) for x in row])


def read_loadings(path: str | Path) -> FactorSolution:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    pct, rotation = float(rows[0][1]), rows[0][2]
    venues = [r[0] for r in rows[2:]]
    loadings = np.array([[float(x) for x in r[1:]] for r in rows[2:]], dtype=float)
    k = loadings.shape[1] if loadings.size else len(rows[1]) - 1
    return FactorSolution(venues, loadings.reshape(len(venues), k), np.full(k, np.nan), pct, rotation)


def _fmt3(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def solve(m: OccurrenceMatrix, k: int, normalize: bool = True) -> FactorSolution:
    """Correlation -> principal components -> Varimax, dropping zero-variance venues."""
    x = np.asarray(m.cells, dtype=float)
    keep = x.std(axis=0) > 0
    if not keep.all():
        m = OccurrenceMatrix(m.rows, [c for c, ok in zip(m.cols, keep) if ok], m.cells[:, keep], m.label, m.years)
    c = correlation(m)
    sol = principal_components(c, min(k, len(c.venues)))
    return rotate(sol, normalize=normalize)

