"""Community flows between consecutive time slices (alluvial "tubes").

An edge links community ``c`` in slice ``t`` to ``c'`` in slice ``t+1`` when
they share members. Shares are measured inside the universe ``U`` of nodes
present in both slices, from each side:

    overlap    = |c & c'| / |c & U|     (how much of c flows into c')
    overlap_in = |c & c'| / |c' & U|    (how much of c' comes from c)

A split needs two or more significant outgoing shares, a merge two or more
significant incoming shares. Reversing time swaps the two shares, so splits
and merges swap exactly.
"""
from __future__ import annotations

import csv
import enum
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .community import Partition

log = logging.getLogger(__name__)

DEFAULT_MIN_OVERLAP = 0.3
GAP_FRACTION = 0.02
BAND_WIDTH = 0.04


@dataclass(frozen=True)
class Slice:
    label: int
    partition: Partition
    nodes: frozenset[str] = None  # type: ignore[assignment]

    def __post_init__(self):
        nodes = frozenset(self.partition.assignment) if self.nodes is None else frozenset(self.nodes)
        missing = nodes - set(self.partition.assignment)
        if missing:
            raise ValueError(f"slice {self.label}: partition misses {sorted(missing)[:3]}")
        object.__setattr__(self, "nodes", nodes)

    def members(self) -> dict[int, set[str]]:
        out: dict[int, set[str]] = defaultdict(set)
        for v in self.nodes:
            out[self.partition.assignment[v]].add(v)
        return dict(out)


@dataclass
class CommunitySeries:
    slices: list[Slice]

    def __post_init__(self):
        labels = [s.label for s in self.slices]
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise ValueError("slice labels must be strictly increasing")

    def reversed(self) -> "CommunitySeries":
        """Same slices in reverse time order (labels negated to stay increasing)."""
        return CommunitySeries([Slice(-s.label, s.partition, s.nodes) for s in reversed(self.slices)])


@dataclass(frozen=True)
class FlowEdge:
    source: tuple[int, int]  # (slice index, community id)
    target: tuple[int, int]
    mass: int
    overlap: float
    overlap_in: float
    significant: bool
    significant_in: bool


@dataclass
class FlowGraph:
    series: CommunitySeries
    edges: list[FlowEdge]
    min_overlap: float

    def sizes(self, t: int) -> dict[int, int]:
        return {c: len(m) for c, m in self.series.slices[t].members().items()}

    def outgoing(self, t: int, c: int) -> list[FlowEdge]:
        return [e for e in self.edges if e.source == (t, c)]

    def incoming(self, t: int, c: int) -> list[FlowEdge]:
        return [e for e in self.edges if e.target == (t, c)]


class EventKind(str, enum.Enum):
    SPLIT = "SPLIT"
    MERGE = "MERGE"
    BIRTH = "BIRTH"
    DEATH = "DEATH"
    CONTINUATION = "CONTINUATION"


@dataclass(frozen=True)
class FlowEvent:
    kind: EventKind
    at: int  # slice index
    communities: tuple


def align_communities(series: CommunitySeries, min_overlap: float = DEFAULT_MIN_OVERLAP) -> FlowGraph:
    if len(series.slices) < 2:
        raise ValueError("need at least 2 slices")
    if not 0 < min_overlap <= 1:
        raise ValueError("min_overlap must be in (0, 1]")
    edges: list[FlowEdge] = []
    for t in range(len(series.slices) - 1):
        a, b = series.slices[t], series.slices[t + 1]
        universe = a.nodes & b.nodes
        if not universe:
            log.warning("slices %s and %s share no nodes; no flow edges", a.label, b.label)
            continue
        src_size = Counter(a.partition.assignment[v] for v in universe)
        dst_size = Counter(b.partition.assignment[v] for v in universe)
        mass = Counter((a.partition.assignment[v], b.partition.assignment[v]) for v in universe)
        for (c, d), n in sorted(mass.items()):
            out_share = n / src_size[c]
            in_share = n / dst_size[d]
            edges.append(FlowEdge(
                source=(t, c), target=(t + 1, d), mass=n,
                overlap=out_share, overlap_in=in_share,
                significant=out_share >= min_overlap,
                significant_in=in_share >= min_overlap,
            ))
    return FlowGraph(series, edges, min_overlap)


def detect_events(g: FlowGraph) -> list[FlowEvent]:
    n_slices = len(g.series.slices)
    out_sig: Counter = Counter()
    in_sig: Counter = Counter()
    for e in g.edges:
        if e.significant:
            out_sig[e.source] += 1
        if e.significant_in:
            in_sig[e.target] += 1
    events: list[FlowEvent] = []
    for t, sl in enumerate(g.series.slices):
        for c in sorted(set(sl.partition.assignment[v] for v in sl.nodes)):
            node = (t, c)
            if in_sig[node] >= 2:
                events.append(FlowEvent(EventKind.MERGE, t, node))
            if out_sig[node] >= 2:
                events.append(FlowEvent(EventKind.SPLIT, t, node))
            if t > 0 and in_sig[node] == 0:
                events.append(FlowEvent(EventKind.BIRTH, t, node))
            if t < n_slices - 1 and out_sig[node] == 0:
                events.append(FlowEvent(EventKind.DEATH, t, node))
        for e in g.edges:
            if (
                e.source[0] == t and e.significant and e.significant_in
                and out_sig[e.source] == 1 and in_sig[e.target] == 1
            ):
                events.append(FlowEvent(EventKind.CONTINUATION, t, (e.source, e.target)))
    return events


def event_counts(events: Sequence[FlowEvent]) -> dict[str, int]:
    counts = Counter(e.kind.value for e in events)
    return {k.value: counts.get(k.value, 0) for k in EventKind}


# -- geometry ------------------------------------------------------------------

@dataclass(frozen=True)
class Band:
    slice: int
    community: int
    size: int
    x0: float
    x1: float
    y0: float
    y1: float


@dataclass(frozen=True)
class Ribbon:
    source: tuple[int, int]
    target: tuple[int, int]
    mass: int
    significant: bool
    x0: float  # right edge of the source band
    x1: float  # left edge of the target band
    y0_top: float
    y0_bottom: float
    y1_top: float
    y1_bottom: float


@dataclass
class AlluvialGeometry:
    bands: list[Band]
    ribbons: list[Ribbon]
    labels: list = field(default_factory=list)
    colors: dict = field(default_factory=dict)  # (slice, community) -> palette index


def alluvial_layout(g: FlowGraph, gap: float = GAP_FRACTION, band_width: float = BAND_WIDTH) -> AlluvialGeometry:
    """Stacked bands per slice (largest first) joined by mass-proportional ribbons, in the unit square."""
    n_slices = len(g.series.slices)
    if n_slices == 0:
        raise ValueError("empty flow graph")
    bands: dict[tuple[int, int], Band] = {}
    scale: list[float] = []
    for t in range(n_slices):
        sizes = g.sizes(t)
        order = sorted(sizes, key=lambda c: (-sizes[c], c))
        usable = 1.0 - gap * (len(order) - 1)
        total = sum(sizes.values())
        s = usable / total if total else 0.0
        scale.append(s)
        x0 = t * (1.0 - band_width) / (n_slices - 1) if n_slices > 1 else 0.0
        y = 0.0
        for c in order:
            h = sizes[c] * s
            bands[(t, c)] = Band(t, c, sizes[c], x0, x0 + band_width, y, y + h)
            y += h + gap

    out_off = {k: b.y0 for k, b in bands.items()}
    in_off = {k: b.y0 for k, b in bands.items()}
    edges = sorted(g.edges, key=lambda e: (e.source[0], bands[e.source].y0, bands[e.target].y0))
    ribbons = []
    for e in edges:
        sb, tb = bands[e.source], bands[e.target]
        h0 = e.mass * scale[e.source[0]]
        y0 = out_off[e.source]
        out_off[e.source] = y0 + h0
        ribbons.append(Ribbon(e.source, e.target, e.mass, e.significant, sb.x1, tb.x0, y0, y0 + h0, 0.0, 0.0))
    # incoming side: stack by source band position
    ordered_in = sorted(range(len(ribbons)), key=lambda i: (ribbons[i].target, bands[ribbons[i].source].y0))
    fixed = list(ribbons)
    for i in ordered_in:
        r = ribbons[i]
        h1 = r.mass * scale[r.target[0]]
        y1 = in_off[r.target]
        in_off[r.target] = y1 + h1
        fixed[i] = Ribbon(r.source, r.target, r.mass, r.significant, r.x0, r.x1, r.y0_top, r.y0_bottom, y1, y1 + h1)
    return AlluvialGeometry(
        bands=sorted(bands.values(), key=lambda b: (b.slice, b.y0)),
        ribbons=fixed,
        labels=[s.label for s in g.series.slices],
        colors=_chain_colors(g, bands),
    )


def _chain_colors(g: FlowGraph, bands: dict) -> dict:
    """Palette index per band; a community keeps its predecessor's color along a continuation."""
    events = detect_events(g)
    cont = {ev.communities[1]: ev.communities[0] for ev in events if ev.kind is EventKind.CONTINUATION}
    colors: dict = {}
    next_color = 0
    for key in sorted(bands, key=lambda k: (k[0], bands[k].y0)):
        prev = cont.get(key)
        if prev is not None and prev in colors:
            colors[key] = colors[prev]
        else:
            colors[key] = next_color
            next_color += 1
    return colors


# -- files -------------------------------------------------------------------------

def write_flow_csv(g: FlowGraph, path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice_from", "comm_from", "slice_to", "comm_to", "mass", "overlap", "significant",
                    "overlap_in", "significant_in"])
        labels = [s.label for s in g.series.slices]
        for e in g.edges:
            w.writerow([labels[e.source[0]], e.source[1], labels[e.target[0]], e.target[1], e.mass,
                        f"{e.overlap:.4f}", int(e.significant), f"{e.overlap_in:.4f}", int(e.significant_in)])


def write_events_csv(g: FlowGraph, events: Sequence[FlowEvent], path: str | Path) -> None:
    from .exporters import atomic_writer

    labels = [s.label for s in g.series.slices]
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "slice", "communities"])
        for ev in events:
            if ev.kind is EventKind.CONTINUATION:
                (t0, c0), (t1, c1) = ev.communities
                desc = f"{labels[t0]}:{c0}->{labels[t1]}:{c1}"
            else:
                desc = f"{labels[ev.communities[0]]}:{ev.communities[1]}"
            w.writerow([ev.kind.value, labels[ev.at], desc])


def write_bands_csv(geom: AlluvialGeometry, path: str | Path) -> None:
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element", "slice", "community", "to_slice", "to_community", "size_or_mass",
                    "x0", "x1", "y0_top", "y0_bottom", "y1_top", "y1_bottom"])
        for b in geom.bands:
            w.writerow(["band", geom.labels[b.slice], b.community, "", "", b.size,
                        f"{b.x0:.6f}", f"{b.x1:.6f}", f"{b.y0:.6f}", f"{b.y1:.6f}", "", ""])
        for r in geom.ribbons:
            w.writerow(["ribbon", geom.labels[r.source[0]], r.source[1], geom.labels[r.target[0]], r.target[1],
                        r.mass, f"{r.x0:.6f}", f"{r.x1:.6f}", f"{r.y0_top:.6f}", f"{r.y0_bottom:.6f}",
                        f"{r.y1_top:.6f}", f"{r.y1_bottom:.6f}"])
