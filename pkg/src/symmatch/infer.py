"""Test-time map extraction by nearest-neighbour search in embedding space."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import _accel
from .autodiff import Tensor
from .geom import PointCloud, PointMap, flip, save_shape
from .model import EncoderParams, embed

METHODS = ("exact", "grid_bucket")


@dataclass
class MatchResult:
    map: PointMap
    distances: np.ndarray  # Euclidean embedding distance to the chosen neighbour
    elapsed_ms: float


class ExactIndex:
    def __init__(self, data: np.ndarray):
        self.data = np.ascontiguousarray(data, dtype=np.float64)

    def query(self, queries: np.ndarray):
        """``(indices, squared_distances)``; ties resolve to the lowest index."""
        queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, self.data.shape[1])
        if len(queries) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        return _accel.nn_argmin(queries, self.data)


class GridBucketIndex(ExactIndex):
    """Uniform grid over the first (up to 3) embedding coordinates.

    Rings of cells are visited outward from the query's cell; the search
    stops once every unvisited cell is provably farther than the current best.
    Candidates are re-scored with the exact kernel in ascending index order, so
    results (tie rule included) are identical to :class:`ExactIndex`.
    """

    SLACK = 1e-9  # relative margin on the pruning bound, absorbs rounding

    def __init__(self, data: np.ndarray, dims: int = 3):
        super().__init__(data)
        n, k = self.data.shape
        self.m = min(dims, k)
        proj = self.data[:, : self.m]
        self.lo = proj.min(axis=0) if n else np.zeros(self.m)
        span = float((proj.max(axis=0) - self.lo).max()) if n else 0.0
        per_dim = max(1, round((max(n, 1) / 4.0) ** (1.0 / self.m)))
        self.h = span / per_dim if span > 0 else 1.0
        cells = np.floor((proj - self.lo) / self.h).astype(np.int64)
        self.buckets: dict[tuple, list[int]] = {}
        for i, c in enumerate(map(tuple, cells)):
            self.buckets.setdefault(c, []).append(i)
        self.max_cell = cells.max(axis=0) if n else np.zeros(self.m, dtype=np.int64)

    def _ring(self, center, r):
        for off in itertools.product(range(-r, r + 1), repeat=self.m):
            if max(abs(o) for o in off) == r:
                yield tuple(c + o for c, o in zip(center, off))

    def query(self, queries: np.ndarray):
        queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, self.data.shape[1])
        nq = len(queries)
        idx = np.zeros(nq, dtype=np.int64)
        best = np.full(nq, np.inf)
        if nq == 0 or len(self.data) == 0:
            return idx, best
        for qi, q in enumerate(queries):
            center = tuple(np.floor((q[: self.m] - self.lo) / self.h).astype(np.int64))
            # rings needed to cover every occupied cell from this center
            reach = int(max(max(abs(c), abs(c - mc)) for c, mc in zip(center, self.max_cell)))
            cands: list[int] = []
            for r in range(reach + 1):
                for cell in self._ring(center, r):
                    cands.extend(self.buckets.get(cell, ()))
                if not cands:
                    continue
                order = np.sort(np.asarray(cands, dtype=np.int64))
                j, d2 = _accel.nn_argmin(q[None, :], self.data[order])
                idx[qi], best[qi] = order[j[0]], d2[0]
                # every point outside rings 0..r lies at least r*h away in the projected coords
                bound = r * self.h
                if bound * bound > best[qi] * (1.0 + self.SLACK):
                    break
        return idx, best


def accelerate(embeddings, method: str = "exact"):
    """Search structure over ``embeddings`` rows; every method returns exact argmins."""
    data = embeddings.data if isinstance(embeddings, Tensor) else np.asarray(embeddings)
    if method == "exact":
        return ExactIndex(data)
    if method == "grid_bucket":
        return GridBucketIndex(data)
    raise ValueError(f"unknown search method {method!r}; expected one of {METHODS}")


def nearest_map(phi_x: np.ndarray, phi_y: np.ndarray, method: str = "exact") -> MatchResult:
    t0 = time.perf_counter()
    idx, d2 = accelerate(np.asarray(phi_y), method).query(np.asarray(phi_x))
    elapsed = (time.perf_counter() - t0) * 1000.0
    return MatchResult(PointMap(idx, len(phi_y)), np.sqrt(d2), elapsed)


def _embed(params: EncoderParams, cloud: PointCloud) -> np.ndarray:
    return embed(params, cloud).data


def match(params: EncoderParams, X: PointCloud, Y: PointCloud, method: str = "exact") -> MatchResult:
    """Map each point of X to the point of Y with the nearest embedding."""
    t0 = time.perf_counter()
    res = nearest_map(_embed(params, X), _embed(params, Y), method)
    res.elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return res


def self_symmetry(params: EncoderParams, X: PointCloud, axis: int = 0, method: str = "exact") -> MatchResult:
    """Self-map of X read off from matching X against its reflection.

    Reflection keeps vertex order, so index j of the reflected copy is vertex j of X.
    """
    t0 = time.perf_counter()
    res = nearest_map(_embed(params, X), _embed(params, flip(X, axis)), method)
    res.elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return res


def coordinate_colors(shape: PointCloud) -> np.ndarray:
    """RGB per vertex from min-max scaled coordinates."""
    p = shape.positions
    lo, hi = p.min(axis=0), p.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.round(255.0 * (p - lo) / span).astype(np.uint8)


def write_color_transfer(path, source: PointCloud, target: PointCloud, pmap: PointMap) -> np.ndarray:
    """Color ``source`` by pulling the target's coordinate colors back through ``pmap``.

    Writes the colored source to ``path`` and returns the colors.
    """
    colors = coordinate_colors(target)[pmap.targets]
    save_shape(path, source, "ply", colors=colors)
    return colors


def reference_colors_path(path) -> str:
    root, ext = str(path), ""
    if root.lower().endswith(".ply"):
        root, ext = root[:-4], ".ply"
    return f"{root}_target{ext or '.ply'}"


__all__ = [
    "MatchResult",
    "ExactIndex",
    "GridBucketIndex",
    "accelerate",
    "nearest_map",
    "match",
    "self_symmetry",
    "coordinate_colors",
    "write_color_transfer",
    "reference_colors_path",
]
