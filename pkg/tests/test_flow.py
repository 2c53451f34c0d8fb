import numpy as np
import pytest

from citemap.community import Partition
from citemap.flow import (
    CommunitySeries,
    EventKind,
    Slice,
    align_communities,
    alluvial_layout,
    detect_events,
    event_counts,
)

NODES = list("abcdef")


def sl(label, labels, nodes=NODES):
    return Slice(label, Partition.from_labels(nodes, labels))


def split_series():
    return CommunitySeries([sl(1, [0] * 6), sl(2, [0, 0, 0, 1, 1, 1])])


def test_identity_alignment():
    g = align_communities(CommunitySeries([sl(1, [0, 0, 0, 1, 1, 1]), sl(2, [0, 0, 0, 1, 1, 1])]))
    assert [(e.mass, e.overlap, e.significant) for e in g.edges] == [(3, 1.0, True), (3, 1.0, True)]
    counts = event_counts(detect_events(g))
    assert counts["CONTINUATION"] == 2 and counts["SPLIT"] == counts["MERGE"] == 0


def test_split_fixture():
    g = align_communities(split_series(), 0.3)
    assert [(e.overlap, e.significant) for e in g.edges] == [(0.5, True), (0.5, True)]
    assert event_counts(detect_events(g))["SPLIT"] == 1
    rev = align_communities(split_series().reversed(), 0.3)
    counts = event_counts(detect_events(rev))
    assert counts["MERGE"] == 1 and counts["SPLIT"] == 0


def test_universe_restriction():
    s1 = sl(1, [0, 0, 0, 0, 0, 0, 0], NODES + ["g"])
    g = align_communities(CommunitySeries([s1, sl(2, [0] * 6)]))
    assert g.edges[0].mass == 6 and g.edges[0].overlap == 1.0


def test_disjoint_slices_warn(caplog):
    g = align_communities(CommunitySeries([sl(1, [0, 0, 0], list("abc")), sl(2, [0, 0, 0], list("xyz"))]))
    assert g.edges == []
    assert "share no nodes" in caplog.text


def test_validation():
    with pytest.raises(ValueError):
        align_communities(CommunitySeries([sl(1, [0] * 6)]))
    with pytest.raises(ValueError):
        align_communities(split_series(), 0.0)
    with pytest.raises(ValueError):
        CommunitySeries([sl(2, [0] * 6), sl(1, [0] * 6)])
    with pytest.raises(ValueError):
        Slice(1, Partition({"a": 0}), frozenset("ab"))


def test_birth_and_death():
    s1 = sl(1, [0, 0, 0], list("abc"))
    s2 = sl(2, [0, 0, 0, 1, 1], list("abcxy"))
    s3 = sl(3, [0, 0], list("xy"))
    events = detect_events(align_communities(CommunitySeries([s1, s2, s3])))
    kinds = {(e.kind, e.at) for e in events}
    assert (EventKind.BIRTH, 1) in kinds
    assert (EventKind.DEATH, 1) in kinds


def test_relabel_invariance():
    a = align_communities(split_series())
    b = align_communities(CommunitySeries([sl(1, [0] * 6), sl(2, [1, 1, 1, 0, 0, 0])]))
    assert sorted((e.mass, e.overlap) for e in a.edges) == sorted((e.mass, e.overlap) for e in b.edges)


def random_series(rng):
    pool = [f"n{i}" for i in range(int(rng.integers(4, 16)))]
    slices = []
    for t in range(int(rng.integers(2, 6))):
        nodes = [v for v in pool if rng.random() < 0.8] or pool[:1]
        labels = rng.integers(0, int(rng.integers(1, 5)), len(nodes))
        slices.append(sl(t, labels, nodes))
    return CommunitySeries(slices)


def test_mass_conservation_and_duality():
    rng = np.random.default_rng(0)
    for _ in range(100):
        series = random_series(rng)
        g = align_communities(series, float(rng.uniform(0.1, 0.9)))
        for t in range(len(series.slices) - 1):
            nxt = series.slices[t + 1].nodes
            for c, members in series.slices[t].members().items():
                out = sum(e.mass for e in g.outgoing(t, c))
                assert out + len(members - nxt) == len(members)
        fwd = event_counts(detect_events(g))
        bwd = event_counts(detect_events(align_communities(series.reversed(), g.min_overlap)))
        assert (fwd["SPLIT"], fwd["MERGE"]) == (bwd["MERGE"], bwd["SPLIT"])


def test_alluvial_single_community():
    geom = alluvial_layout(align_communities(CommunitySeries([sl(1, [0] * 6), sl(2, [0] * 6)])))
    assert len(geom.bands) == 2 and len(geom.ribbons) == 1
    assert all(b.y0 == 0 and b.y1 == pytest.approx(1.0) for b in geom.bands)
    r = geom.ribbons[0]
    assert (r.y0_top, r.y0_bottom, r.y1_top, r.y1_bottom) == pytest.approx((0, 1, 0, 1))


def test_alluvial_equal_communities_and_split():
    g = align_communities(split_series())
    geom = alluvial_layout(g)
    second = [b for b in geom.bands if b.slice == 1]
    assert second[0].y1 - second[0].y0 == pytest.approx(second[1].y1 - second[1].y0)
    assert second[1].y0 - second[0].y1 == pytest.approx(0.02)
    assert [r.mass for r in geom.ribbons] == [3, 3]
    first = geom.ribbons[0]
    assert first.y0_bottom - first.y0_top == pytest.approx(0.5)


def test_continuation_chain_keeps_color():
    series = CommunitySeries([sl(t, [0, 0, 0, 1, 1, 1]) for t in range(4)])
    geom = alluvial_layout(align_communities(series))
    for c in (0, 1):
        assert len({geom.colors[(t, c)] for t in range(4)}) == 1
    assert geom.colors[(0, 0)] != geom.colors[(0, 1)]
