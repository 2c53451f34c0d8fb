"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--sizes 50 200 500] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from citemap import _pykernels
from citemap.community import _csr

try:
    from citemap import _ckernels
except ImportError:
    _ckernels = None


def random_graph(n, p, rng):
    a = np.triu((rng.random((n, n)) < p) * rng.random((n, n)), 1)
    return a + a.T


def bench_local_move(mod, a, repeat):
    csr = _csr(a)
    strength = a.sum(axis=1)
    m2 = float(a.sum())
    order = np.random.default_rng(0).permutation(a.shape[0]).astype(np.int64)

    def once():
        comm = np.arange(a.shape[0], dtype=np.int64)
        tot = strength.copy()
        mod.local_move(*csr, strength, order, comm, tot, m2, 1.0)

    return min(timeit.repeat(once, number=1, repeat=repeat))


def bench_stress(mod, n, rng, repeat):
    x = rng.standard_normal((n, 2))
    d = np.abs(rng.standard_normal((n, n)))
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0)
    w = np.ones((n, n))
    np.fill_diagonal(w, 0)
    return min(timeit.repeat(lambda: mod.stress_terms(x, d, w), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 500])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(1)
    mods = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<12}{'n':>6}" + "".join(f"{name:>12}" for name, _ in mods) + f"{'speedup':>10}")
    for n in args.sizes:
        a = random_graph(n, 0.2, rng)
        t = [bench_local_move(m, a, args.repeat) for _, m in mods]
        sp = f"{t[0] / t[-1]:>9.1f}x" if len(t) > 1 else ""
        print(f"{'local_move':<12}{n:>6}" + "".join(f"{x * 1e3:>10.2f}ms" for x in t) + sp)
        t = [bench_stress(m, n, rng, args.repeat) for _, m in mods]
        sp = f"{t[0] / t[-1]:>9.1f}x" if len(t) > 1 else ""
        print(f"{'stress':<12}{n:>6}" + "".join(f"{x * 1e3:>10.2f}ms" for x in t) + sp)


if __name__ == "__main__":
    main()
