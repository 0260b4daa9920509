"""Desk-scale synthetic data: a bilaterally symmetric template and smooth deformations of it.

The template is a closed latitude/longitude surface with bumps placed
symmetrically about the x=0 plane. Longitudes are offset by half a step, so
no vertex lies on the mirror plane and every vertex has a distinct twin.
Deformations are sinusoidal warps that commute with the mirror, followed by
a small rigid rotation; both preserve the index-level symmetry map exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..geom import Mesh, PointCloud, PointMap, normalize

# (direction, height, width) of radial bumps; the first two are mirror twins
_BUMPS = (
    ((0.8, 0.0, 0.6), 0.45, 0.35),
    ((-0.8, 0.0, 0.6), 0.45, 0.35),
    ((0.0, 0.0, 1.0), 0.30, 0.30),
    ((0.0, 1.0, 0.2), 0.20, 0.50),
    ((0.5, 0.3, -0.8), 0.25, 0.30),
    ((-0.5, 0.3, -0.8), 0.25, 0.30),
)
_AXES = np.array([0.75, 0.5, 1.0])


def grid_dims(n: int) -> tuple[int, int] | None:
    """(rings, longitudes) with rings * longitudes == n, longitudes even, rings >= 3."""
    best = None
    for lon in range(4, n // 3 + 1, 2):
        if n % lon:
            continue
        rings = n // lon
        if rings < 3:
            continue
        score = abs(lon - 2 * rings)
        if best is None or score < best[0]:
            best = (score, rings, lon)
    return None if best is None else (best[1], best[2])


def _template_positions(rings: int, lon: int) -> np.ndarray:
    theta = np.pi * (np.arange(rings) + 0.5) / rings
    phi = 2 * np.pi * (np.arange(lon) + 0.5) / lon
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    u = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)
    r = np.ones(len(u))
    for direction, height, width in _BUMPS:
        d = np.asarray(direction) / np.linalg.norm(direction)
        r += height * np.exp(-np.sum((u - d) ** 2, axis=1) / width**2)
    return u * r[:, None] * _AXES


def _template_faces(rings: int, lon: int) -> np.ndarray:
    idx = np.arange(rings * lon).reshape(rings, lon)
    faces = []
    for i in range(rings - 1):
        for j in range(lon):
            a, b = idx[i, j], idx[i, (j + 1) % lon]
            c, d = idx[i + 1, j], idx[i + 1, (j + 1) % lon]
            faces.append((a, c, b))
            faces.append((b, c, d))
    # close both ends with a fan over the first/last ring
    for ring, flip in ((0, False), (rings - 1, True)):
        for j in range(1, lon - 1):
            tri = (idx[ring, 0], idx[ring, j + 1], idx[ring, j])
            faces.append(tri[::-1] if flip else tri)
    return np.asarray(faces, dtype=np.int64)


def mirror_map(rings: int, lon: int) -> np.ndarray:
    """Index of the x-mirror twin of each grid vertex (phi -> pi - phi)."""
    j = np.arange(lon)
    twin = (lon // 2 - 1 - j) % lon
    return (np.arange(rings)[:, None] * lon + twin[None, :]).reshape(-1)


def make_template(n: int):
    """Normalized symmetric template with ``n`` vertices.

    Returns ``(shape, symmetry)``; ``shape`` is a Mesh when ``n`` factors into a
    usable grid, otherwise a PointCloud sampled from a finer grid.
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    dims = grid_dims(n)
    if dims is not None:
        rings, lon = dims
        mesh = Mesh(_template_positions(rings, lon), faces=_template_faces(rings, lon))
        shape, _, _ = normalize(mesh)
        twin = mirror_map(rings, lon)
        return _symmetrize(shape, twin), PointMap(twin, n)
    # no usable factorization: take n/2 vertices from x>0 of a finer grid plus their twins
    lon = 2 * max(4, int(np.ceil(np.sqrt(n))))
    rings = max(3, int(np.ceil(n / lon)) + 1)
    pos = _template_positions(rings, lon)
    twin = mirror_map(rings, lon)
    right = np.flatnonzero(pos[:, 0] > 1e-9)[: n // 2]  # strictly off the mirror plane
    keep = np.concatenate([right, twin[right]])
    sym = np.concatenate([np.arange(n // 2) + n // 2, np.arange(n // 2)])
    shape, _, _ = normalize(PointCloud(pos[keep]))
    return _symmetrize(shape, sym), PointMap(sym, n)


def _symmetrize(shape: PointCloud, twin: np.ndarray) -> PointCloud:
    """Overwrite each x<0 vertex with the exact mirror image of its twin; put fixed points on x=0."""
    pos = np.array(shape.positions)
    pos[twin == np.arange(len(twin)), 0] = 0.0
    left = np.flatnonzero(pos[:, 0] < 0)
    pos[left] = pos[twin[left]] * np.array([-1.0, 1.0, 1.0])
    return dataclasses.replace(shape, positions=pos)


@dataclass(frozen=True)
class SymmetricWarp:
    """Smooth displacement field that commutes with x -> -x.

    x-displacement is odd in x, y/z displacements are even in x.
    """

    amplitude: float
    freqs: np.ndarray  # 3 frequencies
    phases: np.ndarray  # 5 phases
    coefs: np.ndarray  # 6 coefficients

    @classmethod
    def random(cls, rng: np.random.Generator, amplitude: float) -> "SymmetricWarp":
        return cls(
            amplitude=float(amplitude),
            freqs=rng.uniform(0.5, 2.0, size=3),
            phases=rng.uniform(0, 2 * np.pi, size=5),
            coefs=rng.uniform(-1.0, 1.0, size=6),
        )

    def displacement(self, p: np.ndarray) -> np.ndarray:
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        w, ph, c = self.freqs, self.phases, self.coefs
        dx = x * (c[0] * np.sin(w[0] * y + ph[0]) + c[1] * np.cos(w[1] * z + ph[1]))
        dy = c[2] * np.sin(w[1] * z + ph[2]) + c[3] * x * x
        dz = c[4] * np.sin(w[2] * y + ph[3]) + c[5] * np.cos(w[0] * x)
        return self.amplitude * np.stack([dx, dy, dz], axis=1)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return p + self.displacement(p)


def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def deform(template: PointCloud, seed, amplitude: float) -> PointCloud:
    """Mirror-commuting warp followed by a rotation of at most ``amplitude / 2`` radians."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    warp = SymmetricWarp.random(rng, amplitude)
    axis = rng.standard_normal(3)
    angle = 0.5 * amplitude * rng.uniform(-1.0, 1.0)
    pos = warp(template.positions)
    if angle != 0.0:
        pos = pos @ _rotation(axis, angle).T
    if isinstance(template, Mesh):
        return Mesh(pos, faces=template.faces)
    return PointCloud(pos)


def generate_synthetic_pair(seed: int, n: int = 300, deform_amplitude: float = 0.2):
    """Returns ``(template, deformed, gt_map, symmetry_map, mesh_or_None)``.

    The template depends only on ``n``; ``seed`` drives the deformation. The
    ground-truth map is the identity on indices.
    """
    template, sym = make_template(n)
    deformed = deform(template, seed, deform_amplitude)
    mesh = template if isinstance(template, Mesh) else None
    return template, deformed, PointMap.identity(n), sym, mesh


def deformations(count: int, n: int, amplitude: float, seed: int) -> list[PointCloud]:
    """``count`` deformed copies of the size-``n`` template (normalized), shape i seeded by (seed, i)."""
    template, _ = make_template(n)
    return [normalize(deform(template, np.random.default_rng([seed, i]), amplitude))[0] for i in range(count)]


def synthetic_dataset(num_pairs: int, n: int = 300, amplitude: float = 0.2, seed: int = 0):
    """In-memory to-template dataset with ``num_pairs`` deformed shapes."""
    from .data import Dataset, Pair

    template, sym = make_template(n)
    shapes = {"template": template}
    syms = {"template": sym}
    pairs = []
    for i, shape in enumerate(deformations(num_pairs, n, amplitude, seed)):
        name = f"shape_{i:03d}"
        shapes[name] = shape
        syms[name] = sym
        pairs.append(Pair(name, "template", PointMap.identity(n)))
    return Dataset(shapes, syms, pairs)


def write_synthetic(out_dir, num_pairs: int, n: int = 300, amplitude: float = 0.2, seed: int = 0):
    """Write template, deformed shapes, maps, symmetry maps and ``index.json`` to ``out_dir``."""
    from pathlib import Path

    from ..geom import save_shape, write_map
    from .data import DatasetIndex, ShapeEntry

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = synthetic_dataset(num_pairs, n, amplitude, seed)
    ext = "off" if isinstance(ds.shapes["template"], Mesh) else "ply"
    entries = []
    for name, shape in ds.shapes.items():
        save_shape(out / f"{name}.{ext}", shape)
        write_map(out / f"{name}.sym", ds.syms[name])
        entry = ShapeEntry(name, f"{name}.{ext}", sym=f"{name}.sym")
        if name != "template":
            write_map(out / f"{name}.map", PointMap.identity(n))
            entry.map = f"{name}.map"
        entries.append(entry)
    index = DatasetIndex(entries, "to_template", "template", root=out)
    index.save(out / "index.json")
    return index
