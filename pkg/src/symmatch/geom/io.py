"""Readers and writers for OFF, ascii PLY, OBJ and plain-text correspondence files."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .types import Mesh, PointCloud, PointMap

FORMATS = ("off", "ply", "obj")


class ShapeFormatError(ValueError):
    """Malformed shape or map file. ``line`` is 1-based when known."""

    def __init__(self, path, message: str, line: int | None = None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _format_of(path, fmt: str | None) -> str:
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt not in FORMATS:
        raise ValueError(f"unsupported shape format {fmt!r} (expected one of {', '.join(FORMATS)})")
    return fmt


def _content_lines(path):
    """(line number, tokens) for each non-blank, non-comment line."""
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for no, raw in enumerate(f, start=1):
            s = raw.split("#", 1)[0].strip()
            if s:
                yield no, s.split()


def _build(path, positions, faces, line_of_face=None):
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(positions) == 0:
        raise ShapeFormatError(path, "no vertices")
    if not np.all(np.isfinite(positions)):
        raise ShapeFormatError(path, "non-finite vertex coordinate")
    if not faces:
        return PointCloud(positions)
    faces = np.asarray(faces, dtype=np.int64)
    bad = np.flatnonzero((faces < 0).any(axis=1) | (faces >= len(positions)).any(axis=1))
    if bad.size:
        line = line_of_face[bad[0]] if line_of_face else None
        raise ShapeFormatError(path, f"face index out of range (n={len(positions)})", line)
    try:
        return Mesh(positions, faces=faces)
    except ValueError as exc:
        raise ShapeFormatError(path, str(exc)) from None


def _floats(path, no, toks, count=3):
    try:
        vals = [float(t) for t in toks[:count]]
    except ValueError:
        raise ShapeFormatError(path, "cannot parse vertex coordinates", no) from None
    if len(vals) < count:
        raise ShapeFormatError(path, f"expected {count} coordinates, got {len(vals)}", no)
    return vals


def _read_off(path):
    it = _content_lines(path)
    try:
        no, toks = next(it)
    except StopIteration:
        raise ShapeFormatError(path, "empty file") from None
    head = toks[0].upper()
    if not head.endswith("OFF"):
        raise ShapeFormatError(path, "missing OFF header", no)
    rest = toks[1:]
    if head != "OFF" and head != "COFF":
        # e.g. "OFF4 2 0" glued together is not accepted; NOFF/STOFF are unsupported
        raise ShapeFormatError(path, f"unsupported OFF variant {toks[0]!r}", no)
    if not rest:
        try:
            no, rest = next(it)
        except StopIteration:
            raise ShapeFormatError(path, "missing vertex/face counts", no) from None
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except (ValueError, IndexError):
        raise ShapeFormatError(path, "bad vertex/face count line", no) from None
    positions = []
    for _ in range(nv):
        try:
            no, toks = next(it)
        except StopIteration:
            raise ShapeFormatError(
                path, f"header declares {nv} vertices but file contains {len(positions)}", no
            ) from None
        positions.append(_floats(path, no, toks))
    faces, lines = [], []
    for _ in range(nf):
        try:
            no, toks = next(it)
        except StopIteration:
            raise ShapeFormatError(path, f"header declares {nf} faces but file contains {len(faces)}", no) from None
        try:
            ids = [int(t) for t in toks]
        except ValueError:
            raise ShapeFormatError(path, "cannot parse face record", no) from None
        if ids[0] != 3 or len(ids) < 4:
            raise ShapeFormatError(path, f"non-triangle face with {ids[0]} vertices", no)
        faces.append(ids[1:4])
        lines.append(no)
    return _build(path, positions, faces, lines)


def _read_ply(path):
    with open(path, "rb") as f:
        raw = f.read()
    text = raw.decode("utf-8", errors="replace").splitlines()
    if not text or text[0].strip() != "ply":
        raise ShapeFormatError(path, "missing ply magic", 1)
    elements = []  # (name, count, [props], list_prop?)
    body_start = None
    for no, line in enumerate(text[1:], start=2):
        toks = line.split()
        if not toks or toks[0] in ("comment", "obj_info"):
            continue
        if toks[0] == "format":
            if toks[1] != "ascii":
                raise ShapeFormatError(path, f"only ascii PLY is supported, got {toks[1]}", no)
        elif toks[0] == "element":
            elements.append([toks[1], int(toks[2]), []])
        elif toks[0] == "property":
            if not elements:
                raise ShapeFormatError(path, "property before element", no)
            elements[-1][2].append(toks[-1] if toks[1] != "list" else ("list", toks[-1]))
        elif toks[0] == "end_header":
            body_start = no
            break
        else:
            raise ShapeFormatError(path, f"unexpected header line {toks[0]!r}", no)
    if body_start is None:
        raise ShapeFormatError(path, "missing end_header")
    body = [(no, line.split()) for no, line in enumerate(text[body_start:], start=body_start + 1) if line.strip()]
    pos = 0
    positions, faces, lines = [], [], []
    for name, count, props in elements:
        if pos + count > len(body):
            raise ShapeFormatError(
                path, f"element {name!r} declares {count} rows but file has {len(body) - pos}", body[-1][0] if body else None
            )
        rows = body[pos : pos + count]
        pos += count
        if name == "vertex":
            try:
                cols = [props.index(c) for c in ("x", "y", "z")]
            except ValueError:
                raise ShapeFormatError(path, "vertex element lacks x/y/z") from None
            for no, toks in rows:
                try:
                    positions.append([float(toks[c]) for c in cols])
                except (ValueError, IndexError):
                    raise ShapeFormatError(path, "cannot parse vertex row", no) from None
        elif name == "face":
            for no, toks in rows:
                try:
                    k = int(toks[0])
                    ids = [int(t) for t in toks[1 : 1 + k]]
                except (ValueError, IndexError):
                    raise ShapeFormatError(path, "cannot parse face row", no) from None
                if k != 3 or len(ids) != 3:
                    raise ShapeFormatError(path, f"non-triangle face with {k} vertices", no)
                faces.append(ids)
                lines.append(no)
    return _build(path, positions, faces, lines)


def _read_obj(path):
    positions, faces, lines = [], [], []
    for no, toks in _content_lines(path):
        if toks[0] == "v":
            positions.append(_floats(path, no, toks[1:]))
        elif toks[0] == "f":
            if len(toks) != 4:
                raise ShapeFormatError(path, f"non-triangle face with {len(toks) - 1} vertices", no)
            ids = []
            for t in toks[1:]:
                try:
                    i = int(t.split("/")[0])
                except ValueError:
                    raise ShapeFormatError(path, "cannot parse face record", no) from None
                ids.append(i - 1 if i > 0 else len(positions) + i)
            faces.append(ids)
            lines.append(no)
    return _build(path, positions, faces, lines)


_READERS = {"off": _read_off, "ply": _read_ply, "obj": _read_obj}


def load_shape(path, fmt: str | None = None) -> Mesh | PointCloud:
    """Read a shape; returns a Mesh when the file has faces, else a PointCloud.

    Vertex order is preserved exactly as stored.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return _READERS[_format_of(path, fmt)](path)


def save_shape(path, shape: PointCloud, fmt: str | None = None, colors=None) -> None:
    """Write ``shape``. ``colors`` (n×3 uint8) is only supported for PLY."""
    fmt = _format_of(path, fmt)
    pos = shape.positions
    faces = shape.faces if isinstance(shape, Mesh) else np.zeros((0, 3), dtype=np.int64)
    if colors is not None:
        if fmt != "ply":
            raise ValueError("vertex colors can only be written to PLY")
        colors = np.asarray(colors)
        if colors.shape != (len(pos), 3):
            raise ValueError("colors must be n×3")
        colors = np.clip(np.round(colors), 0, 255).astype(np.uint8)
    vfmt = "{:.17g} {:.17g} {:.17g}"
    with open(path, "w", encoding="utf-8") as f:
        if fmt == "off":
            f.write(f"OFF\n{len(pos)} {len(faces)} 0\n")
            for p in pos:
                f.write(vfmt.format(*p) + "\n")
            for a, b, c in faces:
                f.write(f"3 {a} {b} {c}\n")
        elif fmt == "obj":
            for p in pos:
                f.write("v " + vfmt.format(*p) + "\n")
            for a, b, c in faces:
                f.write(f"f {a + 1} {b + 1} {c + 1}\n")
        else:
            f.write("ply\nformat ascii 1.0\n")
            f.write(f"element vertex {len(pos)}\nproperty double x\nproperty double y\nproperty double z\n")
            if colors is not None:
                f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
            if len(faces):
                f.write(f"element face {len(faces)}\nproperty list uchar int vertex_indices\n")
            f.write("end_header\n")
            for i, p in enumerate(pos):
                row = vfmt.format(*p)
                if colors is not None:
                    row += " {} {} {}".format(*colors[i])
                f.write(row + "\n")
            for a, b, c in faces:
                f.write(f"3 {a} {b} {c}\n")


def read_map(path, one_indexed: bool = True, target_size: int | None = None) -> PointMap:
    """One integer per line: the target vertex of source vertex i on line i."""
    targets = []
    offset = 1 if one_indexed else 0
    with open(path, "r", encoding="utf-8") as f:
        for no, raw in enumerate(f, start=1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            try:
                v = int(float(s.split()[0]))
            except ValueError:
                raise ShapeFormatError(path, f"not an integer: {s!r}", no) from None
            if v - offset < 0:
                raise ShapeFormatError(path, f"index {v} below {offset}", no)
            if target_size is not None and v - offset >= target_size:
                raise ShapeFormatError(path, f"index {v} out of range for {target_size} vertices", no)
            targets.append(v - offset)
    return PointMap(np.asarray(targets, dtype=np.int64), target_size)


def write_map(path, pmap: PointMap, one_indexed: bool = True) -> None:
    offset = 1 if one_indexed else 0
    with open(path, "w", encoding="utf-8") as f:
        for t in pmap.targets:
            f.write(f"{int(t) + offset}\n")
