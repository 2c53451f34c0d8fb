import numpy as np
import pytest
from netutil import dist

from citemap.layout import (
    Configuration,
    DissimilarityMatrix,
    aggregated_stress,
    dissimilarity_from_similarity,
    displacements,
    dynamic_layout,
    frame_seed,
    kruskal_stress,
    raw_stress,
    stress_majorization,
)
from citemap.simnet import SimilarityMatrix


def dm(values, label=None, names=None):
    values = np.asarray(values, dtype=float)
    return DissimilarityMatrix(names or [f"v{i}" for i in range(len(values))], values, label=label)


def planted(rng, n):
    return dm(dist(rng.standard_normal((n, 2))))


def test_distance_transform():
    s = SimilarityMatrix(["a", "b", "c"], np.array([[1, 0.5, 0.0], [0.5, 1, 1.0], [0.0, 1.0, 1]]))
    d = dissimilarity_from_similarity(s, tau=0.2)
    assert d.values[0, 1] == pytest.approx(0.5)
    assert d.values[0, 2] == 1.0 and d.values[1, 2] == 0.0
    assert d.weights[0, 1] == 1.0 and d.weights[0, 2] == 0.1


def test_equilateral_triangle():
    c = stress_majorization(dm(np.ones((3, 3)) - np.eye(3)))
    iu = np.triu_indices(3, 1)
    d = dist(c.positions)[iu]
    assert d.max() - d.min() < 1e-6
    np.testing.assert_allclose(c.positions.mean(axis=0), 0, atol=1e-12)


def test_two_points():
    c = stress_majorization(dm([[0, 1], [1, 0]]))
    assert dist(c.positions)[0, 1] == pytest.approx(1.0, abs=1e-9)


def test_degenerate_inputs():
    with pytest.raises(ValueError):
        stress_majorization(dm(np.zeros((3, 3))))
    with pytest.raises(ValueError):
        stress_majorization(dm([[0]]))


def test_planted_recovery_classical_start():
    rng = np.random.default_rng(0)
    for _ in range(10):
        d = planted(rng, int(rng.integers(3, 25)))
        c = stress_majorization(d, init="classical", tol=1e-14, max_iter=20000)
        assert raw_stress(d, c.positions) < 1e-6


def test_stress_monotone():
    rng = np.random.default_rng(1)
    for s in range(20):
        n = int(rng.integers(3, 20))
        a = rng.random((n, n))
        d = dm((a + a.T) * (1 - np.eye(n)))
        h = np.array(stress_majorization(d, seed=s).stress_history)
        assert np.all(np.diff(h) <= 1e-12 * np.maximum(h[:-1], 1))


def test_seeded_determinism():
    d = planted(np.random.default_rng(2), 8)
    a, b = stress_majorization(d, seed=4), stress_majorization(d, seed=4)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_kruskal_cases():
    tri = np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    c = Configuration(["a", "b", "c"], tri)
    assert kruskal_stress(dm(dist(tri), names=["a", "b", "c"]), c) == pytest.approx(0.0, abs=1e-12)
    target = dm([[0, 1, 2], [1, 0, 1], [2, 1, 0]], names=["a", "b", "c"])
    assert kruskal_stress(target, c) == pytest.approx(np.sqrt(1 / 6))
    assert kruskal_stress(target, Configuration(["a", "b", "c"], 2 * tri)) != pytest.approx(np.sqrt(1 / 6))
    with pytest.raises(ValueError):
        kruskal_stress(dm(np.zeros((3, 3)), names=["a", "b", "c"]), c)


def test_kruskal_rigid_motion_invariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(3, 15))
        d = dm(np.abs(rng.standard_normal((n, n))) * (1 - np.eye(n)))
        d.values = (d.values + d.values.T) / 2
        x = rng.standard_normal((n, 2))
        th = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        moved = x @ rot.T + rng.standard_normal(2) * 10
        a = kruskal_stress(d, Configuration(d.venues, x))
        assert kruskal_stress(d, Configuration(d.venues, moved)) == pytest.approx(a, abs=1e-9)


def drifting_series(seed, n=10, frames=6, noise=0.15):
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n, 2))
    return [dm(dist(base + noise * rng.standard_normal(base.shape)), label=t) for t in range(frames)]


def test_alpha_zero_is_static():
    ds = drifting_series(0)
    ls = dynamic_layout(ds, 0.0, seed=9)
    for t, ((label, c), d) in enumerate(zip(ls.frames, ds)):
        assert label == d.label
        np.testing.assert_array_equal(c.positions, stress_majorization(d, "random", frame_seed(9, t)).positions)


def test_large_alpha_freezes():
    base = drifting_series(1, noise=0.0)
    ls = dynamic_layout(base, 1e6, seed=0)
    assert max(float(v.max()) for v in displacements(ls)) < 1e-3


def test_displacement_monotone_in_alpha():
    ds = drifting_series(2)
    totals = [sum(v.sum() for v in displacements(dynamic_layout(ds, a, seed=2)))
              for a in (0, 0.01, 0.1, 1, 10, 100, 1e4)]
    assert all(b <= a + 1e-9 for a, b in zip(totals, totals[1:]))


def test_new_venue_starts_near_neighbors():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((6, 2))
    names = [f"v{i}" for i in range(6)]
    d0 = dm(dist(x[:5]), 0, names[:5])
    d1 = dm(dist(x), 1, names)
    ls = dynamic_layout([d0, d1], alpha=1.0, seed=1)
    assert ls.frames[1][1].venues == names
    assert "v5" not in ls.frames[0][1].venues


def test_aggregated_stress():
    ds = drifting_series(3, frames=3)
    ls = dynamic_layout(ds, 0.5)
    assert aggregated_stress(ls, ds) >= 0
    single = dynamic_layout(ds[:1], 0.5)
    assert aggregated_stress(single, ds[:1]) == pytest.approx(kruskal_stress(ds[0], single.frames[0][1]))
    perfect = [dm(dist(np.random.default_rng(i).standard_normal((5, 2))), i) for i in range(3)]
    exact = dynamic_layout(perfect, 0.0)
    exact.frames = [(d.label, Configuration(d.venues, np.random.default_rng(i).standard_normal((5, 2))))
                    for i, d in enumerate(perfect)]
    assert aggregated_stress(exact, perfect) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        aggregated_stress(ls, [])


def test_dynamic_validation():
    with pytest.raises(ValueError):
        dynamic_layout([], 1.0)
    with pytest.raises(ValueError):
        dynamic_layout(drifting_series(0, frames=1), -1.0)
