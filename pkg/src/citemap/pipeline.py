"""Stage functions that pass data through files in one output directory.

Every stage reads what earlier stages wrote, writes its own products
atomically and records its counts in ``manifest.json``. ``run_pipeline`` is
literally the stages called in order, so a full run and a sequence of
subcommands produce the same files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, community, corpus, exporters, factors, flow, layout, simnet, wos

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    span: int = 4
    min_count: int = 20
    tau: float = 0.2
    k: int = 5
    alpha: float = 0.5
    smooth_span: int = 4
    min_overlap: float = 0.3
    seed: int = 0
    weighted: bool = True
    out: str = "citemap-out"
    workers: int = 1
    rules: str | None = None
    highlight: str | None = None

    def validate(self) -> "RunConfig":
        checks = [
            (self.span >= 1, "span must be >= 1"),
            (self.min_count >= 0, "min_count must be >= 0"),
            (0 <= self.tau < 1, "tau must be in [0, 1)"),
            (self.k >= 1, "k must be >= 1"),
            (self.alpha >= 0, "alpha must be >= 0"),
            (self.smooth_span >= 1, "smooth_span must be >= 1"),
            (0 < self.min_overlap <= 1, "min_overlap must be in (0, 1]"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def echo(self) -> dict:
        """Settings that influence outputs (the output directory itself does not)."""
        d = asdict(self)
        for k in ("out", "workers"):
            d.pop(k)
        return d


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = types[name]
    try:
        if name == "inputs":
            return [p.strip() for p in raw.split(",") if p.strip()]
        if name == "weighted":
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if "int" in t and "None" not in t:
            return int(raw)
        if "float" in t:
            return float(raw)
        return raw.strip() or None
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def load_config_file(path: str | Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "k_factors":
            key = "k"
        out[key] = _coerce(key, value)
    return out


def stage_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


# -- shared plumbing ---------------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    return Path(cfg.out)


def _record(cfg: RunConfig, stage: str, counts: dict, seconds: float) -> None:
    out = _out(cfg)
    man_path = out / "manifest.json"
    man = json.loads(man_path.read_text(encoding="utf-8")) if man_path.exists() else {}
    man["version"] = __version__
    man["numpy"] = np.__version__
    echo = cfg.echo()
    if not echo["inputs"]:  # only parse reads inputs; later stages keep its record
        echo["inputs"] = man.get("config", {}).get("inputs", [])
    man["config"] = echo
    man.setdefault("stages", {})[stage] = counts
    man["stages"] = {s: man["stages"][s] for s in STAGE_ORDER if s in man["stages"]}
    exporters.write_json(man, man_path, sort_keys=False)
    tpath = out / "timings.json"
    times = json.loads(tpath.read_text(encoding="utf-8")) if tpath.exists() else {}
    times[stage] = round(seconds, 4)
    exporters.write_json(times, tpath)


def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run the {stage!r} stage first")
    return path


def _windows(cfg: RunConfig) -> list[dict]:
    return corpus.read_windows(_need(_out(cfg) / "windows.csv", "windows"))


def _pmap(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _matrix(out: Path, w: dict) -> corpus.OccurrenceMatrix:
    return corpus.read_matrix(_need(out / w["matrix_file"], "windows"), w["label"], (w["first_year"], w["last_year"]))


# -- stages ----------------------------------------------------------------------------

def stage_parse(cfg: RunConfig) -> dict:
    if not cfg.inputs:
        raise ValueError("no input files")
    records = []
    for p in cfg.inputs:
        records.extend(wos.read_export(p))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", wos.RecordRejectedWarning)
        docs, rejected = wos.to_documents(records)
    wos.write_documents(docs, _out(cfg) / "documents.csv")
    return {"records": len(records), "documents": len(docs), "rejected": rejected,
            "cited_references": sum(len(d.refs) for d in docs)}


def _rules(cfg: RunConfig) -> wos.NormalizationRules:
    base = wos.NormalizationRules.default()
    return wos.NormalizationRules.from_tsv(cfg.rules, base) if cfg.rules else base


def stage_clean(cfg: RunConfig) -> dict:
    out = _out(cfg)
    docs = wos.read_documents(_need(out / "documents.csv", "parse"))
    clean, report = wos.clean_corpus(docs, _rules(cfg))
    wos.write_documents(clean, out / "clean_documents.csv")
    with exporters.atomic_writer(out / "cleaning_report.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["measure", "value"])
        w.writerows(report.as_rows())
    return {"refs_in": report.refs_in, "refs_out": report.refs_out,
            "dropped_by_rule": report.refs_dropped_by_rule, "dropped_singleton": report.refs_dropped_singleton}


def stage_freq(cfg: RunConfig) -> dict:
    out = _out(cfg)
    clean = wos.read_documents(_need(out / "clean_documents.csv", "clean"))
    table = corpus.venue_frequencies(clean)
    corpus.write_frequencies(table, out / "frequencies.csv")
    admitted = corpus.apply_threshold(table, cfg.min_count)
    corpus.write_frequencies({v: table[v] for v in admitted}, out / "admitted.csv")
    counts = {"venues": len(table), "admitted": len(admitted)}
    try:
        slope, intercept, r2 = corpus.loglog_fit(table)
        fit = {"slope": round(slope, 6), "intercept": round(intercept, 6), "r_squared": round(r2, 6)}
    except ValueError as exc:
        fit = {"error": str(exc)}
    exporters.write_json(fit, out / "loglog_fit.json")
    counts["loglog_fit"] = fit
    return counts


def stage_windows(cfg: RunConfig) -> dict:
    out = _out(cfg)
    clean = wos.read_documents(_need(out / "clean_documents.csv", "clean"))
    admitted = set(corpus.read_frequencies(_need(out / "admitted.csv", "freq")))
    by_id = {d.id: d for d in clean}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        wins = corpus.moving_windows(clean, cfg.span)
    rows = []
    for w in wins:
        if not w.doc_ids:
            log.warning("window %s has no documents; skipped", w.label)
            continue
        m = corpus.build_matrix(by_id, w, admitted)
        name = f"matrices/matrix_{w.label}.csv"
        corpus.write_matrix(m, out / name)
        all_venues = {r.venue for d in w.doc_ids for r in by_id[d].refs if r.venue}
        rows.append({"label": w.label, "first_year": w.years[0], "last_year": w.years[1],
                     "n_documents": len(w.doc_ids), "n_venues": len(m.cols),
                     "n_venues_all": len(all_venues), "matrix_file": name})
    corpus.write_windows(rows, out / "windows.csv")
    return {"windows": len(rows)}


def _net_one(args) -> tuple[int, int]:
    out, w, tau = args
    m = _matrix(out, w)
    net = simnet.threshold_network(simnet.cosine_matrix(m), tau)
    exporters.write_pajek(net, out / "networks" / f"net_{w['label']}.net")
    return w["label"], net.n_edges


def stage_net(cfg: RunConfig) -> dict:
    out = _out(cfg)
    res = _pmap(_net_one, [(out, w, cfg.tau) for w in _windows(cfg)], cfg.workers)
    return {"networks": len(res), "edges": sum(n for _, n in res)}


def _communities_one(args) -> int:
    out, label, seed, weighted = args
    net = exporters.read_pajek(_need(out / "networks" / f"net_{label}.net", "net"))
    p = community.louvain(net, seed=seed, weighted=weighted)
    exporters.write_clu(p, net.nodes, out / "partitions" / f"part_{label}.clu")
    community.write_partition_csv(p, net.nodes, out / "partitions" / f"part_{label}.csv")
    return p.n_communities


def stage_communities(cfg: RunConfig) -> dict:
    out = _out(cfg)
    jobs = [(out, w["label"], stage_seed(cfg.seed, f"communities:{w['label']}"), cfg.weighted) for w in _windows(cfg)]
    res = _pmap(_communities_one, jobs, cfg.workers)
    return {"partitions": len(res), "communities": res}


def _load_net_partition(out: Path, label: int):
    net = exporters.read_pajek(_need(out / "networks" / f"net_{label}.net", "net"))
    part = exporters.read_clu(_need(out / "partitions" / f"part_{label}.clu", "communities"), net.nodes)
    return net, part


def stage_metrics(cfg: RunConfig) -> dict:
    out = _out(cfg)
    rows = []
    for w in _windows(cfg):
        net, part = _load_net_partition(out, w["label"])
        rows.append(exporters.MetricsRow(
            years=f"{w['first_year']}-{w['last_year']}",
            n_documents=w["n_documents"],
            n_cited_venues=net.n_nodes,
            n_venues_all=w["n_venues_all"],
            n_edge_endpoints=net.n_edge_endpoints,
            n_communities=part.n_communities,
            modularity=community.modularity(net, part, weighted=cfg.weighted),
            avg_clustering=simnet.avg_clustering(net),
            density=simnet.density(net) if net.n_nodes > 1 else 0.0,
        ))
    exporters.write_metrics_report(rows, out / "metrics.csv")
    return {"rows": len(rows)}


def _factors_one(args):
    out, w, k, highlight = args
    m = _matrix(out, w)
    sol = factors.solve(m, k)
    label = w["label"]
    factors.write_loadings(sol, out / "factors" / f"loadings_{label}.csv")
    c = factors.correlation(_drop_constant(m))
    factors.write_scree(factors.principal_components(c, len(c.venues)), out / "factors" / f"scree_{label}.csv")
    return round(sol.pct_variance, 3)


def _drop_constant(m: corpus.OccurrenceMatrix) -> corpus.OccurrenceMatrix:
    keep = np.asarray(m.cells).std(axis=0) > 0
    return corpus.OccurrenceMatrix(m.rows, [c for c, ok in zip(m.cols, keep) if ok], m.cells[:, keep], m.label, m.years)


def stage_factors(cfg: RunConfig) -> dict:
    out = _out(cfg)
    res = _pmap(_factors_one, [(out, w, cfg.k, cfg.highlight) for w in _windows(cfg)], cfg.workers)
    return {"solutions": len(res), "pct_variance": res}


def _series(cfg: RunConfig) -> flow.CommunitySeries:
    out = _out(cfg)
    slices = []
    for w in _windows(cfg):
        _, part = _load_net_partition(out, w["label"])
        slices.append(flow.Slice(w["label"], part))
    return flow.CommunitySeries(slices)


def stage_flow(cfg: RunConfig) -> dict:
    out = _out(cfg)
    series = _series(cfg)
    if len(series.slices) < 2:
        log.warning("fewer than 2 windows; no flow graph")
        return {"edges": 0, "events": flow.event_counts([])}
    g = flow.align_communities(series, cfg.min_overlap)
    events = flow.detect_events(g)
    flow.write_flow_csv(g, out / "flow.csv")
    flow.write_events_csv(g, events, out / "events.csv")
    flow.write_bands_csv(flow.alluvial_layout(g), out / "alluvial_geometry.csv")
    return {"edges": len(g.edges), "events": flow.event_counts(events)}


def stage_layout(cfg: RunConfig) -> dict:
    out = _out(cfg)
    ds = []
    for w in _windows(cfg):
        s = simnet.cosine_matrix(_matrix(out, w))
        ds.append(layout.dissimilarity_from_similarity(s, cfg.tau, label=w["label"]))
    ls = layout.dynamic_layout(ds, cfg.alpha, cfg.smooth_span, seed=stage_seed(cfg.seed, "layout"))
    man = exporters.write_layout_bundle(ls, ds, out / "layout")
    return {"frames": len(ls.frames), "aggregated_stress1": man["aggregated_stress1"]}


def stage_export(cfg: RunConfig) -> dict:
    out = _out(cfg)
    n = 0
    for w in _windows(cfg):
        sol = factors.read_loadings(_need(out / "factors" / f"loadings_{w['label']}.csv", "factors"))
        exporters.write_loadings_report(sol, out / "reports" / f"loadings_report_{w['label']}.csv", cfg.highlight)
        n += 1
    series = _series(cfg)
    svg = 0
    if len(series.slices) >= 2:
        g = flow.align_communities(series, cfg.min_overlap)
        exporters.render_alluvial_svg(flow.alluvial_layout(g), out / "reports" / "alluvial.svg")
        svg = 1
    return {"loadings_reports": n, "svg": svg}


PLOTS = {
    "documents_venues": (["n_documents", "n_cited_venues"], "Documents and cited venues"),
    "network_metrics": (["modularity", "avg_clustering", "density"], "Modularity, clustering and density"),
    "communities": (["n_communities"], "Communities per window"),
}


def stage_plot(cfg: RunConfig) -> dict:
    out = _out(cfg)
    rows = exporters.read_metrics_report(_need(out / "metrics.csv", "metrics"))
    labels = [r.years.split("-")[-1] for r in rows]
    for name, (cols, title) in PLOTS.items():
        series = {c: [float(getattr(r, c)) for r in rows] for c in cols}
        exporters.write_line_chart(out / "plots" / f"{name}.svg", labels, series, title)
    return {"charts": len(PLOTS)}


STAGES: dict[str, Callable[[RunConfig], dict]] = {
    "parse": stage_parse,
    "clean": stage_clean,
    "freq": stage_freq,
    "windows": stage_windows,
    "net": stage_net,
    "communities": stage_communities,
    "metrics": stage_metrics,
    "factors": stage_factors,
    "flow": stage_flow,
    "layout": stage_layout,
    "export": stage_export,
    "plot": stage_plot,
}
STAGE_ORDER = list(STAGES)


def run_stage(cfg: RunConfig, name: str) -> dict:
    cfg.validate()
    _out(cfg).mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        counts = STAGES[name](cfg)
    except Exception as exc:
        raise StageError(name, exc) from exc
    _record(cfg, name, counts, time.perf_counter() - t0)
    log.info("%s: %s", name, counts)
    return counts


def run_pipeline(cfg: RunConfig) -> dict:
    cfg.validate()
    for name in STAGE_ORDER:
        run_stage(cfg, name)
    return json.loads((_out(cfg) / "manifest.json").read_text(encoding="utf-8"))
