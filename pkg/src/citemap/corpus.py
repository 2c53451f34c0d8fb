"""Venue frequencies, the global threshold, moving windows and occurrence matrices."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .wos import DocumentRecord

log = logging.getLogger(__name__)

VenueFrequencyTable = dict  # venue -> total count


@dataclass(frozen=True)
class Window:
    label: int
    years: tuple[int, int]  # inclusive
    doc_ids: tuple[str, ...]

    @property
    def span_label(self) -> str:
        return f"{self.years[0]}-{self.years[1]}"


@dataclass
class OccurrenceMatrix:
    """Whole-count documents x venues matrix for one window."""

    rows: list[str]
    cols: list[str]
    cells: np.ndarray  # int64, shape (len(rows), len(cols))
    label: int | None = None
    years: tuple[int, int] | None = None

    def column(self, venue: str) -> np.ndarray:
        return self.cells[:, self.cols.index(venue)]

    def triplets(self) -> Iterable[tuple[str, str, int]]:
        r, c = np.nonzero(self.cells)
        for i, j in zip(r.tolist(), c.tolist()):
            yield self.rows[i], self.cols[j], int(self.cells[i, j])


def venue_frequencies(corpus: Iterable[DocumentRecord]) -> dict[str, int]:
    counts: Counter[str] = Counter()
    for doc in corpus:
        for ref in doc.refs:
            if ref.venue:
                counts[ref.venue] += 1
    return dict(sorted(counts.items()))


def apply_threshold(table: Mapping[str, int], min_count: int) -> set[str]:
    """Venues cited strictly more than ``min_count`` times."""
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    return {v for v, n in table.items() if n > min_count}


def moving_windows(corpus: Sequence[DocumentRecord], span: int, ragged: bool = False) -> list[Window]:
    """Overlapping windows labeled by their last year, advanced one year at a time.

    Leading windows are only emitted once a full span is available unless
    ``ragged`` is set.
    """
    if span < 1:
        raise ValueError("span must be >= 1")
    if not corpus:
        raise ValueError("corpus is empty")
    years = [d.pub_year for d in corpus]
    lo, hi = min(years), max(years)

    def make(first: int, last: int) -> Window:
        ids = tuple(d.id for d in corpus if first <= d.pub_year <= last)
        return Window(label=last, years=(first, last), doc_ids=ids)

    if hi - lo + 1 < span and not ragged:
        warnings.warn(f"year range {lo}-{hi} shorter than span {span}; using a single window")
        return [make(lo, hi)]
    start = lo if ragged else lo + span - 1
    return [make(max(lo, label - span + 1), label) for label in range(start, hi + 1)]


def build_matrix(
    corpus: Sequence[DocumentRecord] | Mapping[str, DocumentRecord],
    window: Window,
    venues: Iterable[str],
) -> OccurrenceMatrix:
    """Occurrence matrix restricted to admitted venues cited at least once in the window.

    Rows are sorted by document id, columns by venue name.
    """
    venues = set(venues)
    if not venues:
        raise ValueError("venue set is empty")
    if not window.doc_ids:
        raise ValueError(f"window {window.label} has no documents")
    by_id = corpus if isinstance(corpus, Mapping) else {d.id: d for d in corpus}
    per_doc = []
    used: set[str] = set()
    rows = sorted(window.doc_ids)
    for did in rows:
        c = Counter(r.venue for r in by_id[did].refs if r.venue in venues)
        per_doc.append(c)
        used.update(c)
    if not used:
        raise ValueError(f"no document in window {window.label} cites an admitted venue")
    cols = sorted(used)
    index = {v: j for j, v in enumerate(cols)}
    cells = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for i, c in enumerate(per_doc):
        for v, n in c.items():
            cells[i, index[v]] = n
    return OccurrenceMatrix(rows, cols, cells, window.label, window.years)


def loglog_fit(table: Mapping[str, int]) -> tuple[float, float, float]:
    """Least-squares line through (log10 rank, log10 frequency).

    Tied frequencies share their mean rank. A completely flat distribution
    returns slope 0 and r_squared 0.
    """
    freqs = np.array(sorted(table.values(), reverse=True), dtype=float)
    if len(freqs) >= 3 and np.all(freqs == freqs[0]):
        return 0.0, math.log10(freqs[0]), 0.0
    ranks = _mean_ranks_desc(freqs)
    if len(set(zip(ranks.tolist(), freqs.tolist()))) < 3:
        raise ValueError("need at least 3 distinct (rank, frequency) points")
    x, y = np.log10(ranks), np.log10(freqs)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    syy = float(((y - ym) ** 2).sum())
    slope = sxy / sxx
    intercept = ym - slope * xm
    r2 = 0.0 if syy == 0 else min(1.0, sxy * sxy / (sxx * syy))
    return float(slope), float(intercept), float(r2)


def _mean_ranks_desc(sorted_desc: np.ndarray) -> np.ndarray:
    ranks = np.empty(len(sorted_desc))
    i = 0
    while i < len(sorted_desc):
        j = i
        while j + 1 < len(sorted_desc) and sorted_desc[j + 1] == sorted_desc[i]:
            j += 1
        ranks[i : j + 1] = (i + j) / 2 + 1
        i = j + 1
    return ranks


# -- plain-file handoff ----------------------------------------------------------

def write_frequencies(table: Mapping[str, int], path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["venue", "count"])
        for v, n in sorted(table.items(), key=lambda kv: (-kv[1], kv[0])):
            w.writerow([v, n])


def read_frequencies(path: str | Path) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        return dict(sorted((r["venue"], int(r["count"])) for r in csv.DictReader(fh)))


def write_matrix(m: OccurrenceMatrix, path: str | Path) -> None:
    """Sparse triplet CSV. Rows with no admitted venue are kept as ``doc_id,,0``."""
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "venue", "count"])
        nonzero_rows = set()
        for d, v, n in m.triplets():
            nonzero_rows.add(d)
            w.writerow([d, v, n])
        for d in m.rows:
            if d not in nonzero_rows:
                w.writerow([d, "", 0])


def read_matrix(path: str | Path, label: int | None = None, years=None) -> OccurrenceMatrix:
    rows: list[str] = []
    seen: set[str] = set()
    trip = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            if r["doc_id"] not in seen:
                seen.add(r["doc_id"])
                rows.append(r["doc_id"])
            if r["venue"]:
                trip.append((r["doc_id"], r["venue"], int(r["count"])))
    rows.sort()
    cols = sorted({v for _, v, _ in trip})
    ri = {d: i for i, d in enumerate(rows)}
    ci = {v: j for j, v in enumerate(cols)}
    cells = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for d, v, n in trip:
        cells[ri[d], ci[v]] = n
    return OccurrenceMatrix(rows, cols, cells, label, years)


WINDOW_FIELDS = ["label", "first_year", "last_year", "n_documents", "n_venues", "n_venues_all", "matrix_file"]


def write_windows(rows: Sequence[dict], path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.DictWriter(fh, fieldnames=WINDOW_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def read_windows(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for r in csv.DictReader(fh):
            for k in ("label", "first_year", "last_year", "n_documents", "n_venues", "n_venues_all"):
                r[k] = int(r[k])
            out.append(r)
    return out
