"""Deterministic file writers: Pajek .net/.clu, metric and loading reports, SVG charts, layout bundles."""
from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .community import Partition
from .factors import FactorSolution, _fmt3
from .simnet import SimilarityNetwork

PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
]


@contextlib.contextmanager
def atomic_writer(path: str | Path):
    """Text handle that lands at ``path`` only if the block finishes (LF, UTF-8, no BOM)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


# -- Pajek -------------------------------------------------------------------------

def _quote(label: str) -> str:
    return '"' + label.replace('"', '""') + '"'


def pajek_text(net: SimilarityNetwork) -> str:
    if net.n_nodes == 0:
        raise ValueError("empty network")
    lines = [f"*Vertices {net.n_nodes}"]
    lines += [f"{i} {_quote(v)}" for i, v in enumerate(net.nodes, 1)]
    lines.append("*Edges")
    lines += [f"{i + 1} {j + 1} {w:.4f}" for (i, j), w in sorted(net.edges.items())]
    return "\n".join(lines) + "\n"


def write_pajek(net: SimilarityNetwork, path: str | Path) -> None:
    text = pajek_text(net)
    with atomic_writer(path) as fh:
        fh.write(text)


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == '"' and s[-1] == '"':
        return s[1:-1].replace('""', '"')
    return s


def read_pajek(path: str | Path) -> SimilarityNetwork:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    if not lines or not lines[0].lower().startswith("*vertices"):
        raise ValueError(f"{path}: missing *Vertices header")
    n = int(lines[0].split()[1])
    nodes = []
    for ln in lines[1 : 1 + n]:
        num, _, label = ln.partition(" ")
        if int(num) != len(nodes) + 1:
            raise ValueError(f"{path}: vertex ids must run 1..{n}")
        nodes.append(_unquote(label))
    rest = lines[1 + n :]
    if not rest or rest[0].lower() not in ("*edges", "*arcs"):
        raise ValueError(f"{path}: missing *Edges section")
    edges: dict[tuple[int, int], float] = {}
    for ln in rest[1:]:
        if not ln.strip():
            continue
        u, v, *w = ln.split()
        i, j = sorted((int(u) - 1, int(v) - 1))
        edges[(i, j)] = float(w[0]) if w else 1.0
    return SimilarityNetwork(nodes, edges)


def write_clu(p: Partition, nodes: Sequence[str], path: str | Path) -> None:
    """Pajek partition: header then one 1-based community id per node."""
    if set(nodes) != set(p.assignment):
        raise ValueError("node order and partition cover different nodes")
    ids = Partition.from_labels(nodes, p.labels(nodes)).labels(nodes)
    with atomic_writer(path) as fh:
        fh.write(f"*Vertices {len(nodes)}\n")
        fh.writelines(f"{c + 1}\n" for c in ids)


def read_clu(path: str | Path, nodes: Sequence[str]) -> Partition:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    n = int(lines[0].split()[1])
    if n != len(nodes) or len(lines) - 1 != n:
        raise ValueError(f"{path}: expected {len(nodes)} entries")
    return Partition({v: int(c) - 1 for v, c in zip(nodes, lines[1:])})


# -- Table-1 metrics report ------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    years: str
    n_documents: int
    n_cited_venues: int
    n_venues_all: int | None
    n_edge_endpoints: int
    n_communities: int
    modularity: float
    avg_clustering: float
    density: float


METRIC_FIELDS = [
    "years", "n_documents", "n_cited_venues", "n_venues_all", "n_edge_endpoints",
    "n_communities", "modularity", "avg_clustering", "density",
]
SUM_FIELDS = ["n_documents", "n_cited_venues", "n_venues_all", "n_edge_endpoints"]
MEAN_FIELDS = ["n_communities", "modularity", "avg_clustering", "density"]


def mean_std(values: Iterable[float]) -> tuple[float, float]:
    """Welford mean and sample (n-1) standard deviation; std is 0 for one value."""
    n, mean, m2 = 0, 0.0, 0.0
    for x in values:
        n += 1
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    if n == 0:
        raise ValueError("no values")
    return mean, (m2 / (n - 1)) ** 0.5 if n > 1 else 0.0


def format_mean_std(values: Iterable[float]) -> str:
    m, s = mean_std(values)
    return f"{m:.3f} (±{s:.3f})"


def metrics_footer(rows: Sequence[MetricsRow]) -> list[str]:
    if not rows:
        raise ValueError("metrics report needs at least one row")
    out = ["Sum"]
    for f in METRIC_FIELDS[1:]:
        vals = [getattr(r, f) for r in rows]
        if f in SUM_FIELDS:
            out.append("" if any(v is None for v in vals) else str(sum(vals)))
        else:
            out.append(format_mean_std(vals))
    return out


def write_metrics_report(rows: Sequence[MetricsRow], path: str | Path) -> None:
    footer = metrics_footer(rows)
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([
                r.years, r.n_documents, r.n_cited_venues, "" if r.n_venues_all is None else r.n_venues_all,
                r.n_edge_endpoints, r.n_communities, f"{r.modularity:.3f}",
                f"{r.avg_clustering:.3f}", f"{r.density:.3f}",
            ])
        w.writerow(footer)


def read_metrics_report(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh) if r["years"] != "Sum"]
    return [
        MetricsRow(
            r["years"], int(r["n_documents"]), int(r["n_cited_venues"]),
            int(r["n_venues_all"]) if r["n_venues_all"] else None, int(r["n_edge_endpoints"]),
            int(r["n_communities"]), float(r["modularity"]), float(r["avg_clustering"]), float(r["density"]),
        )
        for r in rows
    ]


# -- Table-2 loadings report -----------------------------------------------------

def top_loadings(sol: FactorSolution) -> list[tuple[str, float, bool]]:
    """Per factor: (venue, loading, tied). Ties on |loading| (at 3 decimals) go to the smaller name."""
    out = []
    for j in range(sol.k):
        col = np.round(np.abs(sol.loadings[:, j]), 3)
        best = col.max()
        cands = sorted(v for v, x in zip(sol.venues, col) if x == best)
        venue = cands[0]
        out.append((venue, float(sol.row(venue)[j]), len(cands) > 1))
    return out


def write_loadings_report(sol: FactorSolution, path: str | Path, highlight: str | None = None) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pct_variance_explained", f"{sol.pct_variance:.1f}", sol.rotation])
        w.writerow(["factor", "top_venue", "loading", "tie"])
        for j, (venue, x, tied) in enumerate(top_loadings(sol), 1):
            w.writerow([f"F{j}", venue, _fmt3(x), "tie" if tied else ""])
        w.writerow([])
        w.writerow(["venue"] + [f"F{j + 1}" for j in range(sol.k)] + ["highlight"])
        for v, row in zip(sol.venues, sol.loadings):
            mark = ""
            if v == highlight:
                mark = "*F" + str(int(np.argmax(np.abs(row))) + 1)
            w.writerow([v] + [_fmt3(x) for x in row] + [mark])


# -- SVG ---------------------------------------------------------------------------

def _svg_open(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect class="background" x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _n(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def alluvial_svg(geom, width: int = 900, height: int = 500, margin: int = 30) -> str:
    """SVG text for an :class:`~citemap.flow.AlluvialGeometry`."""
    sx = lambda x: margin + x * (width - 2 * margin)  # noqa: E731
    sy = lambda y: margin + y * (height - 2 * margin)  # noqa: E731
    out = _svg_open(width, height)
    out.append('<g class="ribbons" fill-opacity="0.45" stroke="none">')
    for r in geom.ribbons:
        x0, x1 = sx(r.x0), sx(r.x1)
        xm = (x0 + x1) / 2
        a0, a1, b0, b1 = sy(r.y0_top), sy(r.y0_bottom), sy(r.y1_top), sy(r.y1_bottom)
        d = (f"M{_n(x0)},{_n(a0)} C{_n(xm)},{_n(a0)} {_n(xm)},{_n(b0)} {_n(x1)},{_n(b0)} "
             f"L{_n(x1)},{_n(b1)} C{_n(xm)},{_n(b1)} {_n(xm)},{_n(a1)} {_n(x0)},{_n(a1)} Z")
        color = PALETTE[geom.colors.get(r.source, 0) % len(PALETTE)]
        out.append(f'<path d="{d}" fill="{color}"/>')
    out.append("</g>")
    out.append('<g class="bands" stroke="#333333" stroke-width="0.5">')
    for b in geom.bands:
        color = PALETTE[geom.colors.get((b.slice, b.community), 0) % len(PALETTE)]
        out.append(
            f'<rect x="{_n(sx(b.x0))}" y="{_n(sy(b.y0))}" width="{_n(sx(b.x1) - sx(b.x0))}" '
            f'height="{_n(sy(b.y1) - sy(b.y0))}" fill="{color}"><title>{escape(str(geom.labels[b.slice]))}:'
            f"{b.community} ({b.size})</title></rect>"
        )
    out.append("</g>")
    out.append('<g class="labels" font-family="sans-serif" font-size="10" text-anchor="middle">')
    seen = set()
    for b in geom.bands:
        if b.slice in seen:
            continue
        seen.add(b.slice)
        out.append(f'<text x="{_n(sx((b.x0 + b.x1) / 2))}" y="{_n(height - margin / 3)}">'
                   f"{escape(str(geom.labels[b.slice]))}</text>")
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_alluvial_svg(geom, path: str | Path, **kw) -> None:
    text = alluvial_svg(geom, **kw)
    with atomic_writer(path) as fh:
        fh.write(text)


def line_chart_svg(labels: Sequence, series: dict[str, Sequence[float]], title: str = "",
                   width: int = 640, height: int = 360, margin: int = 45) -> str:
    """Polyline chart with a shared y axis; one line per series, markers at each point."""
    if not labels:
        raise ValueError("no points")
    allv = [v for vals in series.values() for v in vals]
    lo, hi = min(allv), max(allv)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    n = len(labels)
    sx = lambda i: margin + (i / (n - 1) if n > 1 else 0.5) * (width - 2 * margin)  # noqa: E731
    sy = lambda v: height - margin - (v - lo) / (hi - lo) * (height - 2 * margin)  # noqa: E731
    out = _svg_open(width, height)
    out.append(f'<text x="{width // 2}" y="{margin // 2}" font-family="sans-serif" font-size="13" '
               f'text-anchor="middle">{escape(title)}</text>')
    out.append(f'<g stroke="#000000" stroke-width="1"><line x1="{margin}" y1="{height - margin}" '
               f'x2="{width - margin}" y2="{height - margin}"/><line x1="{margin}" y1="{margin}" '
               f'x2="{margin}" y2="{height - margin}"/></g>')
    out.append('<g font-family="sans-serif" font-size="9">')
    for v in np.linspace(lo, hi, 5):
        out.append(f'<text x="{margin - 4}" y="{_n(sy(v) + 3)}" text-anchor="end">{v:.3g}</text>')
    step = max(1, n // 10)
    for i in range(0, n, step):
        out.append(f'<text x="{_n(sx(i))}" y="{height - margin + 14}" text-anchor="middle">'
                   f"{escape(str(labels[i]))}</text>")
    out.append("</g>")
    for k, (name, vals) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_n(sx(i))},{_n(sy(v))}" for i, v in enumerate(vals))
        out.append(f'<g class="series" fill="{color}" stroke="{color}"><title>{escape(name)}</title>')
        out.append(f'<polyline points="{pts}" fill="none" stroke-width="1.5"/>')
        out.extend(f'<circle cx="{_n(sx(i))}" cy="{_n(sy(v))}" r="2"/>' for i, v in enumerate(vals))
        out.append("</g>")
        out.append(f'<text x="{width - margin}" y="{margin + 12 * k}" font-family="sans-serif" '
                   f'font-size="10" text-anchor="end" fill={quoteattr(color)}>{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path: str | Path, labels, series, title: str = "") -> None:
    text = line_chart_svg(labels, series, title)
    with atomic_writer(path) as fh:
        fh.write(text)


# -- layout bundles --------------------------------------------------------------

def write_layout_bundle(ls, ds, out_dir: str | Path) -> dict:
    """One ``frame_<label>.csv`` per window plus ``layout_manifest.json``."""
    from .layout import aggregated_stress, kruskal_stress, write_frame

    out_dir = Path(out_dir)
    frames = []
    for (label, c), d in zip(ls.frames, ds):
        name = f"frame_{label}.csv"
        write_frame(c, out_dir / name)
        frames.append({"label": label, "file": name, "n_venues": len(c.venues),
                       "iterations": c.iterations, "stress1": round(kruskal_stress(d, c), 6)})
    manifest = {
        "alpha": ls.alpha,
        "smooth_span": ls.smooth_span,
        "seeds": list(ls.seeds),
        "frames": frames,
        "aggregated_stress1": round(aggregated_stress(ls, ds), 6),
    }
    write_json(manifest, out_dir / "layout_manifest.json")
    return manifest


def write_json(obj, path: str | Path, sort_keys: bool = True) -> None:
    with atomic_writer(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=sort_keys)
        fh.write("\n")
