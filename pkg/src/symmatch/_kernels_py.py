"""NumPy/heapq versions of the compiled kernels, used when the extension is absent.

Both functions reproduce the compiled arithmetic exactly (same accumulation
order, same strict-less-than tie rule), so results are bitwise identical.
"""

import heapq

import numpy as np


def dijkstra(indptr, indices, weights, sources, n):
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    out = np.full((len(sources), n), np.inf)
    ip, ix, wt = indptr.tolist(), indices.tolist(), weights.tolist()
    for s, src in enumerate(np.asarray(sources).tolist()):
        dist = [float("inf")] * n
        done = [False] * n
        dist[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in range(ip[u], ip[u + 1]):
                w = ix[e]
                if done[w]:
                    continue
                nd = d + wt[e]
                if nd < dist[w]:
                    dist[w] = nd
                    heapq.heappush(heap, (nd, w))
        out[s] = dist
    return out


def nn_argmin(queries, data, chunk=256):
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    data = np.ascontiguousarray(data, dtype=np.float64)
    nq, k = queries.shape
    idx = np.zeros(nq, dtype=np.int64)
    best = np.full(nq, np.inf)
    if len(data) == 0:
        return idx, best
    for start in range(0, nq, chunk):
        q = queries[start : start + chunk]
        acc = np.zeros((len(q), len(data)))
        # column by column keeps the same summation order as the compiled loop
        for c in range(k):
            diff = q[:, c, None] - data[None, :, c]
            acc += diff * diff
        j = np.argmin(acc, axis=1)  # first minimum on ties
        idx[start : start + chunk] = j
        best[start : start + chunk] = acc[np.arange(len(q)), j]
    return idx, best
