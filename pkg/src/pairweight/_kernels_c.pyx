# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_kernels_py`` one function at a time."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

cdef double EPS_D = 1e-12


def pairwise_distances(z):
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], dim = zv.shape[1]
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double acc, t
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                t = zv[i, k] - zv[j, k]
                acc += t * t
            acc = sqrt(acc)
            o[i, j] = acc
            o[j, i] = acc
    return out


def distance_backward(grad_d, z, d):
    cdef const double[:, ::1] g = np.ascontiguousarray(grad_d, dtype=np.float64)
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], dim = zv.shape[1]
    out = np.zeros((n, dim))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double c, t
    for i in range(n):
        for j in range(n):
            if i == j or dv[i, j] < EPS_D:
                continue
            c = (g[i, j] + g[j, i]) / dv[i, j]
            if c == 0.0:
                continue
            for k in range(dim):
                t = c * (zv[i, k] - zv[j, k])
                o[i, k] += t
    return out


def weighted_pair_loss(d, pos_sel, neg_sel, w_pos, w_neg, double m1, double m2,
                       Py_ssize_t n_anchors):
    cdef const double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] ps = np.ascontiguousarray(pos_sel, dtype=np.uint8)
    cdef const cnp.uint8_t[:, ::1] ns = np.ascontiguousarray(neg_sel, dtype=np.uint8)
    cdef const double[:, ::1] wp = np.ascontiguousarray(w_pos, dtype=np.float64)
    cdef const double[:, ::1] wn = np.ascontiguousarray(w_neg, dtype=np.float64)
    cdef Py_ssize_t n = dv.shape[0]
    grad = np.zeros((n, n))
    if n_anchors == 0:
        return 0.0, grad
    cdef double[:, ::1] gv = grad
    cdef double inv = 1.0 / n_anchors
    cdef double total = 0.0, li, a
    cdef Py_ssize_t i, j
    for i in range(n):
        li = 0.0
        for j in range(n):
            if ps[i, j]:
                a = dv[i, j] - m1
                if a >= 0.0:
                    li += wp[i, j] * a
                    gv[i, j] += wp[i, j] * inv
            if ns[i, j]:
                a = m2 - dv[i, j]
                if a >= 0.0:
                    li += wn[i, j] * a
                    gv[i, j] -= wn[i, j] * inv
        total += li
    return total / n_anchors, grad


def weighted_triplet_loss(d, triplets, weights, double margin, Py_ssize_t n_anchors):
    cdef const double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = dv.shape[0]
    grad = np.zeros((n, n))
    cdef Py_ssize_t t_count = len(triplets)
    if t_count == 0 or n_anchors == 0:
        return 0.0, grad
    cdef const cnp.int64_t[:, ::1] tv = np.ascontiguousarray(triplets, dtype=np.int64)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[:, ::1] gv = grad
    per = np.zeros(n)
    cdef double[::1] pv = per
    cdef double inv = 1.0 / n_anchors
    cdef double a, total = 0.0
    cdef Py_ssize_t t, i, j, k
    for t in range(t_count):
        i = tv[t, 0]
        j = tv[t, 1]
        k = tv[t, 2]
        a = dv[i, j] - dv[i, k] + margin
        if a >= 0.0:
            pv[i] += wv[t] * a
            gv[i, j] += wv[t] * inv
            gv[i, k] -= wv[t] * inv
    for i in range(n):
        total += pv[i]
    return total / n_anchors, grad


def first_hit_rank(d, labels):
    cdef const double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const cnp.int64_t[::1] lv = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = dv.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    cdef Py_ssize_t q, l, jstar, rank
    cdef double dstar
    for q in range(n):
        dstar = INFINITY
        jstar = -1
        for l in range(n):
            if l != q and lv[l] == lv[q] and dv[q, l] < dstar:
                dstar = dv[q, l]
                jstar = l
        if jstar < 0:
            ov[q] = -1
            continue
        rank = 0
        for l in range(n):
            if l == q:
                continue
            if dv[q, l] < dstar or (dv[q, l] == dstar and l < jstar):
                rank += 1
        ov[q] = rank
    return out
