"""Synthetic field-tagged exports with two planted reference communities.

Each document belongs to block A or B, or is neutral. A block document cites
most venues of its own block (``A1``..``A10`` or ``B1``..``B10``) a few times
each, and a ``cross_rate`` share of its references go to the other block.
Neutral documents cite only rare venues. Without them the two blocks would be
exact opposites and the factor solution would collapse to one bipolar axis. Rare noise venues, ``THESIS``
references and ordinal-prefixed venue names exercise the cleaning rules.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 300
    first_year: int = 2000
    n_years: int = 12
    venues_per_block: int = 10
    cite_prob: float = 0.95  # chance a document cites a given venue of its block
    extra_mean: float = 0.3  # extra citations per cited venue, Poisson
    cross_rate: float = 0.05
    neutral_share: float = 0.2
    neutral_refs: int = 6
    noise_rate: float = 0.03
    thesis_rate: float = 0.01
    ordinal_rate: float = 0.02
    seed: int = 7


def block_venues(block: str, n: int = 10) -> list[str]:
    return [f"{block}{i}" for i in range(1, n + 1)]


def _ref(rng: np.random.Generator, venue: str, pub_year: int) -> str:
    author = f"AUTHOR{int(rng.integers(1, 500))} {chr(65 + int(rng.integers(0, 26)))}"
    year = pub_year - int(rng.integers(0, 15))
    return f"{author}, {year}, {venue}, V{int(rng.integers(1, 60))}, P{int(rng.integers(1, 900))}"


def generate_records(spec: SyntheticSpec = SyntheticSpec()) -> list[dict]:
    """Document dicts with keys ``ut``, ``year``, ``block`` and ``refs`` (raw reference strings)."""
    rng = np.random.default_rng(spec.seed)
    blocks = {b: block_venues(b, spec.venues_per_block) for b in "AB"}
    years = spec.first_year + (np.arange(spec.n_docs) * spec.n_years) // spec.n_docs
    docs = []
    noise_id = 0
    n_neutral = int(round(spec.neutral_share * spec.n_docs))
    kinds = ["N"] * n_neutral + ["A", "B"] * ((spec.n_docs - n_neutral) // 2 + 1)
    kinds = [kinds[j] for j in rng.permutation(spec.n_docs)] if n_neutral else kinds[: spec.n_docs]
    for i, year in enumerate(years.tolist()):
        own = kinds[i]
        venues: list[str] = []
        if own == "N":
            for _ in range(spec.neutral_refs):
                noise_id += 1
                venues.append(f"NOISE J {noise_id}")
            docs.append({"ut": f"SYN:{i:06d}", "year": year, "block": own,
                         "refs": [_ref(rng, v, year) for v in venues]})
            continue
        other = "B" if own == "A" else "A"
        for v in blocks[own]:
            if rng.random() < spec.cite_prob:
                venues += [v] * (1 + int(rng.poisson(spec.extra_mean)))
        n_cross = int(rng.binomial(max(len(venues), 1), spec.cross_rate))
        venues += [blocks[other][int(rng.integers(0, spec.venues_per_block))] for _ in range(n_cross)]
        for _ in range(int(rng.binomial(len(venues), spec.noise_rate))):
            noise_id += 1
            venues.append(f"NOISE J {noise_id}")
        if rng.random() < spec.thesis_rate * len(venues):
            venues.append("THESIS")
        refs = []
        for v in venues:
            if v[0] in "AB" and rng.random() < spec.ordinal_rate:
                v = f"{int(rng.integers(2, 9))}TH {v}"
            refs.append(_ref(rng, v, year))
        order = rng.permutation(len(refs))
        docs.append({"ut": f"SYN:{i:06d}", "year": year, "block": own, "refs": [refs[j] for j in order]})
    return docs


def export_text(docs: list[dict]) -> str:
    lines = ["FN Synthetic Export", "VR 1.0"]
    for d in docs:
        lines += ["PT J", f"AU Synth, {d['ut'][-3:]}", f"TI Planted document {d['ut']}", "SO SYNTHETIC J"]
        if d["refs"]:
            lines.append(f"CR {d['refs'][0]}")
            lines += [f"   {r}" for r in d["refs"][1:]]
        lines += [f"NR {len(d['refs'])}", f"PY {d['year']}", f"UT {d['ut']}", "ER", ""]
    lines.append("EF")
    return "\n".join(lines) + "\n"


def write_export(path: str | Path, spec: SyntheticSpec = SyntheticSpec()) -> list[dict]:
    docs = generate_records(spec)
    Path(path).write_text(export_text(docs), encoding="utf-8", newline="\n")
    return docs
