from __future__ import annotations

import dataclasses

import numpy as np

from .. import _accel
from .types import PointCloud, PointMap


def normalize(shape: PointCloud):
    """Center on the centroid and scale so the farthest point has norm 1.

    Returns ``(normalized, scale, translation)`` with
    ``normalized = (shape - translation) / scale``. Works for meshes too.
    """
    pos = shape.positions
    translation = pos.mean(axis=0)
    centered = pos - translation
    scale = float(np.sqrt((centered * centered).sum(axis=1)).max())
    if not scale > 0:
        raise ValueError("cannot normalize: all points coincide")
    return dataclasses.replace(shape, positions=centered / scale), scale, translation


def flip(shape: PointCloud, axis: int = 0) -> PointCloud:
    """Reflect through the plane ``coord[axis] = 0``; vertex order is kept."""
    pos = np.array(shape.positions)
    pos[:, axis] = -pos[:, axis]
    return dataclasses.replace(shape, positions=pos)


def flip_x(shape: PointCloud) -> PointCloud:
    return flip(shape, 0)


def sample(shape: PointCloud, count: int, seed=None) -> PointCloud:
    """Uniform sample of ``count`` points without replacement.

    ``seed`` may be an int or a ``numpy.random.Generator``. The result's
    ``ids`` hold the indices into the original shape.
    """
    n = len(shape)
    if not 1 <= count <= n:
        raise ValueError(f"cannot sample {count} points from a shape with {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pick = rng.choice(n, size=count, replace=False)
    return PointCloud(shape.positions[pick], shape.ids[pick])


def restrict_map(pmap: PointMap, source_ids, target_full: PointCloud) -> np.ndarray:
    """Full-resolution target coordinates of the images of ``source_ids``."""
    source_ids = np.asarray(source_ids, dtype=np.int64)
    if source_ids.size and (source_ids.min() < 0 or source_ids.max() >= len(pmap)):
        raise IndexError("source id out of range for map")
    tgt = pmap.targets[source_ids]
    if tgt.size and tgt.max() >= len(target_full):
        raise IndexError("map target out of range for target shape")
    return target_full.positions[tgt]


def restrict_sym_map(sym: PointMap, sampled: PointCloud, full: PointCloud) -> PointMap:
    """Self-map on ``sampled``: each point goes to the sampled point nearest its image."""
    if len(sampled) == 0:
        raise ValueError("empty sample")
    if len(sym) != len(full):
        raise ValueError("symmetry map size does not match the full shape")
    images = full.positions[sym.targets[sampled.ids]]
    idx, _ = _accel.nn_argmin(images, np.ascontiguousarray(sampled.positions))
    return PointMap(idx, len(sampled))
