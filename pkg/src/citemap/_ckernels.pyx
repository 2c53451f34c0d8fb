# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def local_move(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] weights, const double[::1] strength,
               const cnp.int64_t[::1] order, cnp.int64_t[::1] comm,
               double[::1] tot, double m2, double resolution):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t ncomm = tot.shape[0]
    cdef double[::1] neigh_w = np.zeros(ncomm, dtype=np.float64)
    cdef cnp.int64_t[::1] touched = np.empty(n + 1, dtype=np.int64)
    cdef char[::1] in_touched = np.zeros(ncomm, dtype=np.int8)
    cdef double eps = 1e-12 * m2
    cdef Py_ssize_t sweep, k, p, t, ntouched, i, j
    cdef cnp.int64_t ci, cj, c, best_c
    cdef double ki, scale, own_gain, best_gain, g
    cdef long moves = 0, moved
    for sweep in range(10000):
        moved = 0
        for k in range(n):
            i = order[k]
            ci = comm[i]
            ki = strength[i]
            touched[0] = ci
            in_touched[ci] = 1
            ntouched = 1
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    continue
                cj = comm[j]
                if not in_touched[cj]:
                    in_touched[cj] = 1
                    touched[ntouched] = cj
                    ntouched += 1
                neigh_w[cj] += weights[p]
            tot[ci] -= ki
            scale = resolution * ki / m2
            own_gain = neigh_w[ci] - tot[ci] * scale
            best_gain = own_gain
            for t in range(ntouched):
                c = touched[t]
                g = neigh_w[c] - tot[c] * scale
                if g > best_gain:
                    best_gain = g
            best_c = ci
            if best_gain > own_gain + eps:
                best_c = n + ncomm
                for t in range(ntouched):
                    c = touched[t]
                    g = neigh_w[c] - tot[c] * scale
                    if g >= best_gain - eps and c < best_c:
                        best_c = c
            tot[best_c] += ki
            comm[i] = best_c
            for t in range(ntouched):
                c = touched[t]
                neigh_w[c] = 0.0
                in_touched[c] = 0
            if best_c != ci:
                moved += 1
        moves += moved
        if moved == 0:
            break
    return moves


def stress_terms(const double[:, ::1] X, const double[:, ::1] D, const double[:, ::1] W):
    cdef Py_ssize_t n = X.shape[0]
    cdef cnp.ndarray[double, ndim=2] bx_arr = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] bx = bx_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, dist, r, stress = 0.0, resid
    for i in range(n):
        for j in range(i + 1, n):
            dx = X[i, 0] - X[j, 0]
            dy = X[i, 1] - X[j, 1]
            dist = sqrt(dx * dx + dy * dy)
            resid = dist - D[i, j]
            stress += W[i, j] * resid * resid
            if dist > 0:
                r = W[i, j] * D[i, j] / dist
                bx[i, 0] += r * dx
                bx[i, 1] += r * dy
                bx[j, 0] -= r * dx
                bx[j, 1] -= r * dy
    return bx_arr, stress
