"""Pure-Python/numpy versions of the hot kernels (reference and fallback).

``_ckernels.pyx`` mirrors these functions operation for operation so that
both backends produce identical Louvain partitions.
"""
import numpy as np


def local_move(indptr, indices, weights, strength, order, comm, tot, m2, resolution):
    """Louvain local-moving phase, in place on ``comm`` and ``tot``.

    Sweeps nodes in ``order`` until a full sweep makes no move. A node moves
    only on a strictly positive gain over staying; among equally good targets
    the smallest community id wins. Returns the number of moves made.
    """
    n = len(order)
    indptr = indptr.tolist()
    indices = indices.tolist()
    weights = weights.tolist()
    strength = strength.tolist()
    order = order.tolist()
    c_list = comm.tolist()
    t_list = tot.tolist()
    neigh_w = [0.0] * len(t_list)
    eps = 1e-12 * m2
    moves = 0
    for _ in range(10000):
        moved = 0
        for i in order:
            ci = c_list[i]
            ki = strength[i]
            touched = [ci]
            seen = {ci}
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    continue
                cj = c_list[j]
                if cj not in seen:
                    seen.add(cj)
                    touched.append(cj)
                neigh_w[cj] += weights[p]
            t_list[ci] -= ki
            scale = resolution * ki / m2
            own_gain = neigh_w[ci] - t_list[ci] * scale
            best_gain = own_gain
            for c in touched:
                g = neigh_w[c] - t_list[c] * scale
                if g > best_gain:
                    best_gain = g
            best_c = ci
            if best_gain > own_gain + eps:
                best_c = n + len(t_list)
                for c in touched:
                    g = neigh_w[c] - t_list[c] * scale
                    if g >= best_gain - eps and c < best_c:
                        best_c = c
            t_list[best_c] += ki
            c_list[i] = best_c
            for c in touched:
                neigh_w[c] = 0.0
            if best_c != ci:
                moved += 1
        moves += moved
        if moved == 0:
            break
    comm[:] = c_list
    tot[:] = t_list
    return moves


def stress_terms(X, D, W):
    """Weighted raw stress and the Guttman product B(X) @ X."""
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    resid = dist - D
    stress = 0.5 * float((W * resid * resid).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dist > 0, W * D / dist, 0.0)
    np.fill_diagonal(ratio, 0.0)
    bx = (ratio[:, :, None] * diff).sum(axis=1)
    return bx, stress
