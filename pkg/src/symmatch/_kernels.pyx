# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: edge-graph Dijkstra and exact nearest-neighbour scan."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline void _sift_up(double[:] hk, long[:] hv, long pos) noexcept nogil:
    cdef double k = hk[pos]
    cdef long v = hv[pos]
    cdef long parent
    while pos > 0:
        parent = (pos - 1) >> 1
        if hk[parent] <= k:
            break
        hk[pos] = hk[parent]
        hv[pos] = hv[parent]
        pos = parent
    hk[pos] = k
    hv[pos] = v


cdef inline void _sift_down(double[:] hk, long[:] hv, long size) noexcept nogil:
    cdef long pos = 0
    cdef double k = hk[0]
    cdef long v = hv[0]
    cdef long child
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and hk[child + 1] < hk[child]:
            child += 1
        if hk[child] >= k:
            break
        hk[pos] = hk[child]
        hv[pos] = hv[child]
        pos = child
    hk[pos] = k
    hv[pos] = v


def dijkstra(const long[:] indptr, const long[:] indices, const double[:] weights,
             const long[:] sources, long n):
    """Single-source shortest paths from every source over a CSR graph."""
    cdef long ns = sources.shape[0]
    cdef long cap = indices.shape[0] + 1
    out_arr = np.full((ns, n), np.inf)
    cdef double[:, :] out = out_arr
    cdef double[:] hk = np.empty(cap)
    cdef long[:] hv = np.empty(cap, dtype=np.int64)
    cdef cnp.uint8_t[:] done = np.zeros(n, dtype=np.uint8)
    cdef long s, src, size, u, e, w_idx
    cdef double d, nd
    with nogil:
        for s in range(ns):
            src = sources[s]
            done[:] = 0
            out[s, src] = 0.0
            hk[0] = 0.0
            hv[0] = src
            size = 1
            while size > 0:
                d = hk[0]
                u = hv[0]
                size -= 1
                if size > 0:
                    hk[0] = hk[size]
                    hv[0] = hv[size]
                    _sift_down(hk, hv, size)
                if done[u]:
                    continue
                done[u] = 1
                for e in range(indptr[u], indptr[u + 1]):
                    w_idx = indices[e]
                    if done[w_idx]:
                        continue
                    nd = d + weights[e]
                    if nd < out[s, w_idx]:
                        out[s, w_idx] = nd
                        hk[size] = nd
                        hv[size] = w_idx
                        _sift_up(hk, hv, size)
                        size += 1
    return out_arr


def nn_argmin(const double[:, :] queries, const double[:, :] data):
    """Exact Euclidean nearest neighbour of each query row; ties go to the lowest index."""
    cdef long nq = queries.shape[0]
    cdef long nd = data.shape[0]
    cdef long k = queries.shape[1]
    idx_arr = np.zeros(nq, dtype=np.int64)
    dist_arr = np.full(nq, np.inf)
    cdef long[:] idx = idx_arr
    cdef double[:] best = dist_arr
    cdef long i, j, c
    cdef double acc, diff
    with nogil:
        for i in range(nq):
            for j in range(nd):
                acc = 0.0
                for c in range(k):
                    diff = queries[i, c] - data[j, c]
                    acc = acc + diff * diff
                if acc < best[i]:
                    best[i] = acc
                    idx[i] = j
    return idx_arr, dist_arr
