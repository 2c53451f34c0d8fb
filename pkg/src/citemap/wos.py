"""Reader for field-tagged citation-index exports and cited-reference cleaning.

The export layout is the plain-text one: a two-character tag, a space and a
value; lines starting with whitespace continue the most recent tag; each
record runs from ``PT`` to ``ER`` and the file ends with ``EF``.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])(?: (.*))?$")
_YEAR_RE = re.compile(r"^\d{4}$")
_WS_RE = re.compile(r"\s+")
# "5TH", "7", "10TH" ...
_ORDINAL = r"\d+(?:ST|ND|RD|TH)?"
_LEADING_ORDINALS = re.compile(rf"^(P\s+)?(?:{_ORDINAL}\s+)+")

HEADER_TAGS = frozenset({"FN", "VR"})


class ExportFormatError(ValueError):
    """Malformed export; carries the byte offset and the last tag read."""

    def __init__(self, message: str, offset: int, last_tag: str | None):
        super().__init__(f"{message} (byte offset {offset}, last good tag {last_tag or '-'})")
        self.offset = offset
        self.last_tag = last_tag


class RecordRejectedWarning(UserWarning):
    pass


class _Drop:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DROP"

    def __reduce__(self):
        return (_Drop, ())


#: Returned by :func:`normalize_venue` for venues that must be deleted.
DROP = _Drop()


@dataclass
class FieldTaggedRecord:
    tags: list[tuple[str, list[str]]] = field(default_factory=list)

    def get(self, tag: str) -> list[str] | None:
        for name, lines in self.tags:
            if name == tag:
                return lines
        return None

    def first(self, tag: str) -> str | None:
        lines = self.get(tag)
        if not lines:
            return None
        return lines[0].strip() or None


@dataclass(frozen=True)
class CitedReference:
    first_author: str | None = None
    year: int | None = None
    venue_raw: str | None = None
    volume: str | None = None
    page: str | None = None
    #: normalized venue, filled in by :func:`clean_corpus`
    venue: str | None = None


@dataclass(frozen=True)
class DocumentRecord:
    id: str
    pub_year: int
    refs: tuple[CitedReference, ...] = ()


@dataclass
class NormalizationRules:
    strip_sequence_numbers: bool = True
    merge_map: list[tuple[str, str]] = field(default_factory=list)
    drop_list: list[str] = field(default_factory=list)
    drop_singletons: bool = True

    def __post_init__(self):
        self._merge = [(re.compile(p), c) for p, c in self.merge_map]
        self._drop = [re.compile(p) for p in self.drop_list]

    @classmethod
    def default(cls) -> "NormalizationRules":
        return cls(
            strip_sequence_numbers=True,
            merge_map=[
                (r"ANN C COGN SCI", "ANN M COGN SCI"),
                (r"P INT JOINT C AR.*", "P INT JOINT C AR"),
            ],
            drop_list=["THESIS"],
            drop_singletons=True,
        )

    @classmethod
    def from_tsv(cls, path: str | Path, base: "NormalizationRules | None" = None) -> "NormalizationRules":
        """Load rules from a TSV table of ``action<TAB>pattern<TAB>replacement``.

        Actions: ``merge`` (pattern -> replacement), ``drop`` (pattern),
        ``set`` (pattern is ``strip_sequence_numbers`` or ``drop_singletons``,
        replacement a boolean). Rows in the file extend ``base`` (the shipped
        defaults unless given); a ``reset`` row clears the merge and drop lists.
        Blank lines and ``#`` comments are ignored.
        """
        base = base if base is not None else cls.default()
        merge = list(base.merge_map)
        drop = list(base.drop_list)
        flags = {
            "strip_sequence_numbers": base.strip_sequence_numbers,
            "drop_singletons": base.drop_singletons,
        }
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                action = parts[0].strip().lower()
                if action == "reset":
                    merge, drop = [], []
                elif action == "merge" and len(parts) >= 3:
                    merge.append((parts[1].strip(), parts[2].strip()))
                elif action == "drop" and len(parts) >= 2:
                    drop.append(parts[1].strip())
                elif action == "set" and len(parts) >= 3 and parts[1].strip() in flags:
                    flags[parts[1].strip()] = parts[2].strip().lower() in ("1", "true", "yes", "on")
                else:
                    raise ValueError(f"{path}:{lineno}: bad rule line {line!r}")
        return cls(merge_map=merge, drop_list=drop, **flags)


@dataclass
class CleaningReport:
    refs_in: int = 0
    refs_dropped_by_rule: int = 0
    refs_dropped_singleton: int = 0
    refs_out: int = 0
    #: refs without a venue subfield; counted inside refs_dropped_by_rule
    refs_without_venue: int = 0
    #: refs whose second subfield was not a year (venue taken from it)
    refs_without_year: int = 0
    singleton_venues: int = 0

    @property
    def pct_retained(self) -> float:
        return 100.0 * self.refs_out / self.refs_in if self.refs_in else 0.0

    def as_rows(self) -> list[tuple[str, str]]:
        return [
            ("refs_in", str(self.refs_in)),
            ("refs_dropped_by_rule", str(self.refs_dropped_by_rule)),
            ("refs_dropped_singleton", str(self.refs_dropped_singleton)),
            ("refs_out", str(self.refs_out)),
            ("pct_retained", f"{self.pct_retained:.1f}"),
            ("refs_without_venue", str(self.refs_without_venue)),
            ("refs_without_year", str(self.refs_without_year)),
            ("singleton_venues", str(self.singleton_venues)),
        ]


# -- reading -----------------------------------------------------------------

def decode_export(data: bytes) -> str:
    """Decode export bytes: UTF-8 (BOM tolerated) when valid, else Latin-1."""
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def read_export(path: str | Path) -> list[FieldTaggedRecord]:
    return parse_export(decode_export(Path(path).read_bytes()))


def parse_export(text: str) -> list[FieldTaggedRecord]:
    """Split an export into records, attaching continuation lines to their tag."""
    records: list[FieldTaggedRecord] = []
    current: FieldTaggedRecord | None = None
    last_tag: str | None = None
    offset = 0
    for raw in text.splitlines(keepends=True):
        line_offset = offset
        offset += len(raw.encode("utf-8"))
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line[0] in " \t":
            if current is None or not current.tags:
                raise ExportFormatError("continuation line outside a record", line_offset, last_tag)
            current.tags[-1][1].append(line.strip())
            continue
        m = _TAG_RE.match(line)
        if m is None:
            raise ExportFormatError(f"malformed line {line[:20]!r}", line_offset, last_tag)
        tag, value = m.group(1), (m.group(2) or "").strip()
        if current is None:
            if tag in HEADER_TAGS:
                pass
            elif tag == "EF":
                current = None
            elif tag == "PT":
                current = FieldTaggedRecord([(tag, [value])])
            else:
                raise ExportFormatError(f"unexpected tag {tag} outside a record", line_offset, last_tag)
        elif tag == "ER":
            records.append(current)
            current = None
        elif tag in ("PT", "EF"):
            raise ExportFormatError(f"record not terminated before {tag}", line_offset, last_tag)
        else:
            current.tags.append((tag, [value] if value else []))
        last_tag = tag
    if current is not None:
        raise ExportFormatError("truncated record (missing ER)", offset, last_tag)
    return records


# -- interpretation -------------------------------------------------------------

def parse_cited_reference(line: str) -> CitedReference:
    """Split one cited-reference string into its positional subfields.

    >>> parse_cited_reference("Hertwig R, 1999, J BEHAV DECIS MAKING, V12, P275").venue_raw
    'J BEHAV DECIS MAKING'
    """
    tokens = [t.strip() for t in line.split(",")]
    while tokens and not tokens[-1]:
        tokens.pop()
    author = tokens[0] if tokens and tokens[0] else None
    if len(tokens) < 3:
        year = int(tokens[1]) if len(tokens) == 2 and _YEAR_RE.match(tokens[1]) else None
        return CitedReference(first_author=author, year=year)
    if _YEAR_RE.match(tokens[1]):
        year, venue, rest = int(tokens[1]), tokens[2], tokens[3:]
    else:
        year, venue, rest = None, tokens[1], tokens[2:]
    volume = page = None
    for tok in rest:
        if volume is None and len(tok) > 1 and tok[0] == "V" and not tok[1].isspace():
            volume = tok[1:]
        elif page is None and len(tok) > 1 and tok[0] == "P" and not tok[1].isspace():
            page = tok[1:]
    venue = _WS_RE.sub(" ", venue.upper()).strip() or None
    return CitedReference(first_author=author, year=year, venue_raw=venue, volume=volume, page=page)


def record_id(rec: FieldTaggedRecord) -> str:
    ut = rec.first("UT")
    if ut:
        return ut
    h = hashlib.sha1()
    for tag, lines in rec.tags:
        h.update(tag.encode())
        for line in lines:
            h.update(b"\x1f" + line.encode("utf-8"))
        h.update(b"\x1e")
    return "H" + h.hexdigest()[:16]


def to_document(rec: FieldTaggedRecord) -> DocumentRecord | None:
    """Interpret a record; returns None (with a warning) when it has no usable year."""
    py = rec.first("PY")
    if py is None or not _YEAR_RE.match(py):
        warnings.warn(
            f"record {record_id(rec)} rejected: missing or unparseable PY {py!r}",
            RecordRejectedWarning,
            stacklevel=2,
        )
        return None
    cr = rec.get("CR") or []
    refs = tuple(parse_cited_reference(line) for line in cr if line.strip())
    return DocumentRecord(id=record_id(rec), pub_year=int(py), refs=refs)


def to_documents(records: Iterable[FieldTaggedRecord]) -> tuple[list[DocumentRecord], int]:
    """Convert records, skipping rejected ones and duplicate ids; returns (docs, n_rejected)."""
    docs: list[DocumentRecord] = []
    seen: set[str] = set()
    rejected = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RecordRejectedWarning)
        for rec in records:
            doc = to_document(rec)
            if doc is None:
                rejected += 1
            elif doc.id in seen:
                log.warning("duplicate record id %s skipped", doc.id)
            else:
                seen.add(doc.id)
                docs.append(doc)
    for w in caught:
        log.warning("%s", w.message)
    return docs, rejected


# -- cleaning ------------------------------------------------------------------

def normalize_venue(venue_raw: str, rules: NormalizationRules):
    """Canonical venue name, or :data:`DROP` when a drop rule matches."""
    name = _WS_RE.sub(" ", venue_raw.upper()).strip()
    if rules.strip_sequence_numbers:
        m = _LEADING_ORDINALS.match(name)
        if m and m.end() < len(name):
            name = (m.group(1) or "") + name[m.end():]
    for pattern, canonical in rules._merge:
        if pattern.fullmatch(name):
            name = _WS_RE.sub(" ", canonical.upper()).strip()
            break
    for pattern in rules._drop:
        if pattern.fullmatch(name):
            return DROP
    return name


def clean_corpus(
    docs: Sequence[DocumentRecord], rules: NormalizationRules
) -> tuple[list[DocumentRecord], CleaningReport]:
    if not docs:
        raise ValueError("no documents to clean")
    report = CleaningReport()
    staged: list[tuple[DocumentRecord, list[CitedReference]]] = []
    totals: Counter[str] = Counter()
    for doc in docs:
        kept = []
        for ref in doc.refs:
            report.refs_in += 1
            if ref.venue_raw is None:
                report.refs_without_venue += 1
                report.refs_dropped_by_rule += 1
                continue
            if ref.year is None:
                report.refs_without_year += 1
            venue = normalize_venue(ref.venue_raw, rules)
            if venue is DROP or not venue:
                report.refs_dropped_by_rule += 1
                continue
            kept.append(replace(ref, venue=venue))
            totals[venue] += 1
        staged.append((doc, kept))

    singletons = {v for v, n in totals.items() if n == 1} if rules.drop_singletons else set()
    report.singleton_venues = len(singletons)
    out = []
    for doc, kept in staged:
        refs = tuple(r for r in kept if r.venue not in singletons)
        report.refs_dropped_singleton += len(kept) - len(refs)
        report.refs_out += len(refs)
        out.append(replace(doc, refs=refs))
    return out, report


# -- plain-file handoff ----------------------------------------------------------

DOC_FIELDS = ["doc_id", "pub_year", "ref_index", "first_author", "ref_year", "venue_raw", "volume", "page", "venue"]


def write_documents(docs: Sequence[DocumentRecord], path: str | Path) -> None:
    """Long-format CSV, one row per reference; docs without refs get one blank-ref row."""
    from .exporters import atomic_writer

    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DOC_FIELDS)
        for doc in docs:
            if not doc.refs:
                w.writerow([doc.id, doc.pub_year, "", "", "", "", "", "", ""])
            for i, r in enumerate(doc.refs):
                w.writerow([
                    doc.id, doc.pub_year, i, r.first_author or "",
                    "" if r.year is None else r.year, r.venue_raw or "",
                    r.volume or "", r.page or "", r.venue or "",
                ])


def read_documents(path: str | Path) -> list[DocumentRecord]:
    order: list[str] = []
    years: dict[str, int] = {}
    refs: dict[str, list[CitedReference]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            did = row["doc_id"]
            if did not in years:
                order.append(did)
                years[did] = int(row["pub_year"])
                refs[did] = []
            if row["ref_index"] == "":
                continue
            refs[did].append(CitedReference(
                first_author=row["first_author"] or None,
                year=int(row["ref_year"]) if row["ref_year"] else None,
                venue_raw=row["venue_raw"] or None,
                volume=row["volume"] or None,
                page=row["page"] or None,
                venue=row["venue"] or None,
            ))
    return [DocumentRecord(d, years[d], tuple(refs[d])) for d in order]
