from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """n×3 positions plus the vertex ids they came from in the source shape."""

    positions: np.ndarray
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 1:
            raise ValueError(f"positions must be a non-empty n×3 array, got shape {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite values")
        ids = np.arange(len(pos)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (len(pos),):
            raise ValueError("ids must have one entry per point")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "ids", _frozen(ids))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass(frozen=True, eq=False)
class Mesh(PointCloud):
    """Triangle mesh; ``faces`` is m×3 with distinct, in-range vertex indices."""

    faces: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        super().__post_init__()
        faces = np.zeros((0, 3), dtype=np.int64) if self.faces is None else np.asarray(self.faces)
        faces = faces.astype(np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(self.positions)):
            raise ValueError("face index out of range")
        bad = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
        if np.any(bad):
            raise ValueError(f"degenerate face at index {int(np.flatnonzero(bad)[0])}")
        object.__setattr__(self, "faces", _frozen(faces))

    @property
    def m(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as a sorted k×2 array."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def area(self) -> float:
        p = self.positions
        a, b, c = p[self.faces[:, 0]], p[self.faces[:, 1]], p[self.faces[:, 2]]
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())

    def cloud(self) -> PointCloud:
        return PointCloud(self.positions, self.ids)


@dataclass(frozen=True, eq=False)
class PointMap:
    """Vertex-to-vertex map: ``targets[i]`` is the image of source vertex i."""

    targets: np.ndarray
    target_size: int | None = None

    def __post_init__(self):
        t = np.asarray(self.targets)
        if t.ndim != 1:
            raise ValueError("targets must be one-dimensional")
        if t.size and not np.issubdtype(t.dtype, np.integer):
            if not np.all(t == np.round(t)):
                raise ValueError("targets must be integers")
        t = t.astype(np.int64)
        if t.size and t.min() < 0:
            raise ValueError("negative target index")
        if self.target_size is not None and t.size and t.max() >= self.target_size:
            raise ValueError(f"target index {int(t.max())} out of range for size {self.target_size}")
        object.__setattr__(self, "targets", _frozen(t))

    @property
    def source_size(self) -> int:
        return len(self.targets)

    def __len__(self) -> int:
        return len(self.targets)

    def __eq__(self, other) -> bool:
        return isinstance(other, PointMap) and np.array_equal(self.targets, other.targets)

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def identity(cls, n: int) -> "PointMap":
        return cls(np.arange(n), n)
