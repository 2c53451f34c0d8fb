import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from citemap.wos import (
    DROP,
    CitedReference,
    DocumentRecord,
    ExportFormatError,
    NormalizationRules,
    RecordRejectedWarning,
    clean_corpus,
    decode_export,
    normalize_venue,
    parse_cited_reference,
    parse_export,
    read_documents,
    record_id,
    to_document,
    to_documents,
    write_documents,
)

TWO_RECORDS = """FN Export
VR 1.0
PT J
AU Smith, J
PY 1999
CR Hertwig R, 1999, J BEHAV DECIS MAKING, V12, P275
   Anderson J, 1983, ARCHITECTURE COGNITI
   Simon H, 1981, SCI ARTIFICIAL
   Newell A, 1990, UNIFIED THEORIES COG
UT WOS:000001
ER

PT J
PY 2001
UT WOS:000002
ER

EF
"""


def test_two_records_and_continuations():
    recs = parse_export(TWO_RECORDS)
    assert len(recs) == 2
    assert len(recs[0].get("CR")) == 4
    assert recs[1].get("CR") is None


def test_header_only_is_empty():
    assert parse_export("FN Export\nVR 1.0\nEF\n") == []


def test_truncated_record_reports_offset_and_tag():
    text = "FN Export\nPT J\nPY 1999\n"
    with pytest.raises(ExportFormatError) as err:
        parse_export(text)
    assert err.value.last_tag == "PY"
    assert err.value.offset == len(text)


def test_malformed_line():
    with pytest.raises(ExportFormatError) as err:
        parse_export("PT J\nthis is not a tag\nER\n")
    assert err.value.offset == 5
    assert err.value.last_tag == "PT"


def test_continuation_outside_record():
    with pytest.raises(ExportFormatError):
        parse_export("   stray continuation\n")


def test_decode_latin1_and_bom():
    assert decode_export("PT J\nAU Müller\n".encode("latin-1")).endswith("Müller\n")
    assert decode_export(b"\xef\xbb\xbfPT J\n") == "PT J\n"


def test_to_document():
    recs = parse_export(TWO_RECORDS)
    doc = to_document(recs[0])
    assert doc.pub_year == 1999 and doc.id == "WOS:000001" and len(doc.refs) == 4
    assert to_document(recs[1]).refs == ()


def test_missing_year_is_rejected_not_raised():
    rec = parse_export("PT J\nCR A B, 1990, J X\nER\n")[0]
    with pytest.warns(RecordRejectedWarning):
        assert to_document(rec) is None
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        docs, rejected = to_documents([rec])
    assert docs == [] and rejected == 1


def test_hash_id_is_stable():
    a = parse_export("PT J\nPY 2000\nTI x\nER\n")[0]
    b = parse_export("PT J\nPY 2000\nTI x\nER\n")[0]
    c = parse_export("PT J\nPY 2000\nTI y\nER\n")[0]
    assert record_id(a) == record_id(b) != record_id(c)
    assert record_id(a).startswith("H")


def test_duplicate_ids_skipped():
    recs = parse_export("PT J\nPY 2000\nUT X\nER\nPT J\nPY 2001\nUT X\nER\n")
    docs, rejected = to_documents(recs)
    assert len(docs) == 1 and rejected == 0


@pytest.mark.parametrize(
    "line, expected",
    [
        ("Hertwig R, 1999, J BEHAV DECIS MAKING, V12, P275",
         CitedReference("Hertwig R", 1999, "J BEHAV DECIS MAKING", "12", "275")),
        ("SMITH J, 2001", CitedReference("SMITH J", 2001, None)),
        ("Anderson J, 1983, ARCHITECTURE COGNITI", CitedReference("Anderson J", 1983, "ARCHITECTURE COGNITI")),
        ("Anon, Cogn Sci, V5, P1", CitedReference("Anon", None, "COGN SCI", "5", "1")),
        ("Kay P, 1990, lang  var, P12", CitedReference("Kay P", 1990, "LANG VAR", None, "12")),
        ("", CitedReference()),
    ],
)
def test_parse_cited_reference(line, expected):
    assert parse_cited_reference(line) == expected


@given(st.text())
def test_parse_cited_reference_is_total(line):
    parse_cited_reference(line)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("5TH ANN M COGN SCI", "ANN M COGN SCI"),
        ("7th Ann M Cogn Sci", "ANN M COGN SCI"),
        ("ANN C COGN SCI", "ANN M COGN SCI"),
        ("12 ANN C COGN SCI", "ANN M COGN SCI"),
        ("P 7TH INT JOINT C AR", "P INT JOINT C AR"),
        ("Q J EXP PSYCHOL-A", "Q J EXP PSYCHOL-A"),
        ("Q J EXP PSYCHOL", "Q J EXP PSYCHOL"),
        ("  cogn   sci ", "COGN SCI"),
    ],
)
def test_normalize_venue(raw, expected):
    assert normalize_venue(raw, NormalizationRules.default()) == expected


def test_thesis_dropped():
    assert normalize_venue("THESIS", NormalizationRules.default()) is DROP
    assert normalize_venue("thesis", NormalizationRules.default()) is DROP


def test_ordinals_kept_when_disabled():
    rules = NormalizationRules(strip_sequence_numbers=False)
    assert normalize_venue("5TH ANN M COGN SCI", rules) == "5TH ANN M COGN SCI"


@given(st.text(alphabet="ABCMNP0123456789THS -", min_size=1))
def test_normalize_idempotent(raw):
    rules = NormalizationRules.default()
    once = normalize_venue(raw, rules)
    if once is DROP or not once:
        return
    assert normalize_venue(once, rules) == once


def _doc(i, venues):
    return DocumentRecord(f"d{i}", 2000, tuple(CitedReference("X", 1990, v) for v in venues))


def test_clean_drops_singleton_after_merge():
    docs = [_doc(0, ["ANN C COGN SCI", "J A"]), _doc(1, ["5TH ANN M COGN SCI", "J A", "J ONCE"])]
    out, rep = clean_corpus(docs, NormalizationRules.default())
    venues = [r.venue for d in out for r in d.refs]
    assert venues.count("ANN M COGN SCI") == 2
    assert "J ONCE" not in venues
    assert rep.refs_dropped_singleton == 1 and rep.singleton_venues == 1


def test_clean_fixture_ten_docs_one_singleton():
    docs = [_doc(i, ["J A", "J B"]) for i in range(10)]
    docs[3] = _doc(3, ["J A", "J B", "J RARE"])
    out, rep = clean_corpus(docs, NormalizationRules.default())
    assert rep.refs_out == rep.refs_in - 1
    assert all(r.venue != "J RARE" for d in out for r in d.refs)


def test_clean_no_singletons_noop():
    docs = [_doc(i, ["J A", "J B"]) for i in range(3)]
    _, rep = clean_corpus(docs, NormalizationRules.default())
    assert rep.refs_dropped_singleton == 0 and rep.pct_retained == 100.0


def test_clean_conservation_and_missing_venue():
    docs = [
        DocumentRecord("a", 2000, (CitedReference("X", 1990, None), CitedReference("X", 1990, "THESIS"),
                                   CitedReference("X", 1990, "J A"), CitedReference("X", None, "J A"))),
    ]
    _, rep = clean_corpus(docs, NormalizationRules.default())
    assert rep.refs_in == rep.refs_out + rep.refs_dropped_by_rule + rep.refs_dropped_singleton
    assert rep.refs_without_venue == 1 and rep.refs_dropped_by_rule == 2 and rep.refs_without_year == 1


def test_retained_percentage_format():
    from citemap.wos import CleaningReport

    rep = CleaningReport(refs_in=43952, refs_out=24105)
    assert f"{rep.pct_retained:.1f}" == "54.8"


def test_clean_empty_raises():
    with pytest.raises(ValueError):
        clean_corpus([], NormalizationRules.default())


def test_rules_from_tsv(tmp_path):
    p = tmp_path / "rules.tsv"
    p.write_text("# extra\nmerge\tCOGNITIVE SCI\tCOGN SCI\ndrop\tUNPUB.*\nset\tdrop_singletons\tfalse\n")
    rules = NormalizationRules.from_tsv(p)
    assert normalize_venue("cognitive sci", rules) == "COGN SCI"
    assert normalize_venue("UNPUBLISHED", rules) is DROP
    assert normalize_venue("THESIS", rules) is DROP
    assert rules.drop_singletons is False
    p.write_text("reset\n")
    assert normalize_venue("THESIS", NormalizationRules.from_tsv(p)) == "THESIS"
    p.write_text("frobnicate\tx\n")
    with pytest.raises(ValueError):
        NormalizationRules.from_tsv(p)


def test_documents_roundtrip(tmp_path):
    docs, _ = to_documents(parse_export(TWO_RECORDS))
    clean, _ = clean_corpus(docs, NormalizationRules(drop_singletons=False))
    write_documents(clean, tmp_path / "d.csv")
    assert read_documents(tmp_path / "d.csv") == clean
