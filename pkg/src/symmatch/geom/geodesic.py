from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .. import _accel
from .types import Mesh, PointCloud


class DisconnectedGraphError(ValueError):
    def __init__(self, components: int):
        super().__init__(f"graph is disconnected ({components} components)")
        self.components = components


def _csr(n: int, edges: np.ndarray, positions: np.ndarray):
    w = np.linalg.norm(positions[edges[:, 0]] - positions[edges[:, 1]], axis=1)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    g = coo_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n)).tocsr()
    g.sum_duplicates()
    g.sort_indices()
    ncomp, _ = connected_components(g, directed=False)
    if ncomp != 1:
        raise DisconnectedGraphError(ncomp)
    return g.indptr.astype(np.int64), g.indices.astype(np.int64), g.data.astype(np.float64)


def _run(n, edges, positions, sources):
    indptr, indices, weights = _csr(n, edges, positions)
    sources = np.asarray(sources, dtype=np.int64).reshape(-1)
    if sources.size and (sources.min() < 0 or sources.max() >= n):
        raise IndexError("source index out of range")
    return _accel.dijkstra(indptr, indices, weights, sources, n)


def geodesic_distances(mesh: Mesh, sources=None) -> np.ndarray:
    """|sources|×n shortest-path distances along mesh edges (Euclidean edge lengths)."""
    n = len(mesh)
    sources = np.arange(n) if sources is None else sources
    return _run(n, mesh.edges(), mesh.positions, sources)


def knn_edges(positions: np.ndarray, k: int) -> np.ndarray:
    """Undirected edges of the symmetrized k-nearest-neighbour graph."""
    n = len(positions)
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n - 1)
    sq = (positions * positions).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * positions @ positions.T
    np.fill_diagonal(d2, np.inf)
    nbr = np.argsort(d2, axis=1, kind="stable")[:, :k]
    e = np.stack([np.repeat(np.arange(n), k), nbr.reshape(-1)], axis=1)
    e.sort(axis=1)
    return np.unique(e, axis=0)


def knn_graph_geodesics(cloud: PointCloud, k: int, sources=None) -> np.ndarray:
    """Shortest paths over the symmetrized k-NN graph of a point cloud."""
    n = len(cloud)
    sources = np.arange(n) if sources is None else sources
    return _run(n, knn_edges(cloud.positions, k), cloud.positions, sources)
