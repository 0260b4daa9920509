"""Dataset index files, pairing rules and per-step batch construction.

An index is a JSON file::

    {
      "pairing": "to_template",          # or "all_pairs", "explicit"
      "template": "template",            # entry name (to_template / all_pairs)
      "one_indexed": true,
      "shapes": [
        {"name": "template", "path": "template.off", "sym": "template.sym"},
        {"name": "s000", "path": "s000.off", "map": "s000.map", "sym": "s000.sym"}
      ],
      "pairs": [{"source": "a", "target": "b", "map": "a_b.map"}]   # explicit only
    }

``map`` on a shape entry is its correspondence to the template. Paths are
relative to the index file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import _accel
from ..geom import PointCloud, PointMap, flip, load_shape, normalize, read_map, restrict_map, restrict_sym_map, sample
from ..losses import PairData
from .config import ConfigError, TrainConfig

PAIRINGS = ("to_template", "all_pairs", "explicit")


@dataclass
class ShapeEntry:
    name: str
    path: str
    map: str | None = None
    sym: str | None = None


@dataclass
class DatasetIndex:
    shapes: list[ShapeEntry]
    pairing: str = "to_template"
    template: str | None = None
    pairs: list[tuple[str, str, str]] = field(default_factory=list)
    one_indexed: bool = True
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"unknown pairing {self.pairing!r}")
        names = [e.name for e in self.shapes]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate shape names in index")
        if self.template is not None and self.template not in names:
            raise ConfigError(f"template {self.template!r} is not a listed shape")
        if self.pairing == "to_template" and self.template is None:
            raise ConfigError("to_template pairing needs a template entry")

    @classmethod
    def load(cls, path) -> "DatasetIndex":
        path = Path(path)
        if path.is_dir():
            path = path / "index.json"
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read dataset index {path}: {exc}") from None
        shapes = [ShapeEntry(s["name"], s["path"], s.get("map"), s.get("sym")) for s in raw.get("shapes", [])]
        pairs = [(p["source"], p["target"], p["map"]) for p in raw.get("pairs", [])]
        return cls(
            shapes,
            raw.get("pairing", "to_template"),
            raw.get("template"),
            pairs,
            bool(raw.get("one_indexed", True)),
            path.parent,
        )

    def save(self, path) -> None:
        raw = {
            "pairing": self.pairing,
            "template": self.template,
            "one_indexed": self.one_indexed,
            "shapes": [{k: v for k, v in vars(e).items() if v is not None} for e in self.shapes],
        }
        if self.pairs:
            raw["pairs"] = [{"source": a, "target": b, "map": m} for a, b, m in self.pairs]
        Path(path).write_text(json.dumps(raw, indent=2) + "\n", encoding="utf-8")

    def pair_names(self) -> list[tuple[str, str]]:
        names = [e.name for e in self.shapes]
        if self.pairing == "to_template":
            return [(n, self.template) for n in names if n != self.template]
        if self.pairing == "all_pairs":
            pool = [n for n in names if n != self.template]
            return [(a, b) for a in pool for b in pool if a != b]
        return [(a, b) for a, b, _ in self.pairs]


@dataclass
class Pair:
    source: str
    target: str
    gt: PointMap


@dataclass
class Dataset:
    """Normalized shapes plus ground truth, ready for batching."""

    shapes: dict[str, PointCloud]
    syms: dict[str, PointMap]
    pairs: list[Pair]

    def min_size(self) -> int:
        used = {p.source for p in self.pairs} | {p.target for p in self.pairs}
        return min(len(self.shapes[n]) for n in used)


def _compose_via_template(map_x: PointMap, map_y: PointMap, template: PointCloud) -> PointMap:
    """X -> Y through a shared template: pick the Y vertex whose template image is closest."""
    q = np.ascontiguousarray(template.positions[map_x.targets])
    ref = np.ascontiguousarray(template.positions[map_y.targets])
    idx, _ = _accel.nn_argmin(q, ref)
    return PointMap(idx, len(map_y))


def load_dataset(index: DatasetIndex, cfg: TrainConfig) -> Dataset:
    """Read every shape and map named in ``index`` and check them against ``cfg``."""
    shapes: dict[str, PointCloud] = {}
    syms: dict[str, PointMap] = {}
    to_template: dict[str, PointMap] = {}
    for e in index.shapes:
        shape = load_shape(index.root / e.path)
        shapes[e.name], _, _ = normalize(shape)
    for e in index.shapes:
        n = len(shapes[e.name])
        if e.sym:
            sym = read_map(index.root / e.sym, index.one_indexed, target_size=n)
            if len(sym) != n:
                raise ConfigError(f"symmetry map of {e.name} has {len(sym)} entries for {n} vertices")
            syms[e.name] = sym
        if e.map:
            tsize = len(shapes[index.template]) if index.template else None
            m = read_map(index.root / e.map, index.one_indexed, target_size=tsize)
            if len(m) != n:
                raise ConfigError(f"map of {e.name} has {len(m)} entries for {n} vertices")
            to_template[e.name] = m
    pairs = []
    if index.pairing == "explicit":
        for a, b, mpath in index.pairs:
            if a not in shapes or b not in shapes:
                raise ConfigError(f"pair ({a}, {b}) names an unknown shape")
            gt = read_map(index.root / mpath, index.one_indexed, target_size=len(shapes[b]))
            if len(gt) != len(shapes[a]):
                raise ConfigError(f"map {mpath} has {len(gt)} entries for {len(shapes[a])} vertices")
            pairs.append(Pair(a, b, gt))
    else:
        for a, b in index.pair_names():
            if b == index.template:
                if a not in to_template:
                    raise ConfigError(f"shape {a} has no map to the template")
                gt = to_template[a]
            elif a in to_template and b in to_template and index.template:
                gt = _compose_via_template(to_template[a], to_template[b], shapes[index.template])
            elif len(shapes[a]) == len(shapes[b]) and a not in to_template and b not in to_template:
                gt = PointMap.identity(len(shapes[a]))
            else:
                raise ConfigError(f"no ground truth available for pair ({a}, {b})")
            pairs.append(Pair(a, b, gt))
    if not pairs:
        raise ConfigError("dataset yields no training pairs")
    ds = Dataset(shapes, syms, pairs)
    validate(ds, cfg)
    return ds


def validate(ds: Dataset, cfg: TrainConfig) -> None:
    if cfg.sample_count > ds.min_size():
        raise ConfigError(f"sample_count {cfg.sample_count} exceeds the smallest shape ({ds.min_size()} points)")
    if cfg.loss.needs_symmetry:
        for p in ds.pairs:
            for name in (p.source, p.target):
                if name not in ds.syms:
                    raise ConfigError(f"mode {cfg.loss.mode} needs a symmetry map for shape {name}")


@dataclass
class BatchItem:
    pair: PairData
    x: PointCloud
    y: PointCloud
    xf: PointCloud | None = None
    yf: PointCloud | None = None


def make_batch(ds: Dataset, pair_ids, cfg: TrainConfig, rng: np.random.Generator) -> list[BatchItem]:
    """Sample every pair in ``pair_ids`` independently and attach what the loss mode needs."""
    items = []
    for pid in pair_ids:
        p = ds.pairs[pid]
        X_full, Y_full = ds.shapes[p.source], ds.shapes[p.target]
        X = sample(X_full, cfg.sample_count, rng)
        Y = sample(Y_full, cfg.sample_count, rng)
        data = PairData(X.positions, Y.positions, restrict_map(p.gt, X.ids, Y_full))
        if cfg.loss.mode == "supervised_comm":
            data.sym_x = restrict_sym_map(ds.syms[p.source], X, X_full)
            data.sym_y = restrict_sym_map(ds.syms[p.target], Y, Y_full)
        elif cfg.loss.mode == "nn_plus_sym_nn":
            data.sym_targets_x = restrict_map(ds.syms[p.source], X.ids, X_full)
            data.sym_targets_y = restrict_map(ds.syms[p.target], Y.ids, Y_full)
        item = BatchItem(data, X, Y)
        if cfg.loss.needs_flip:
            item.xf = flip(X, cfg.flip_axis)
            item.yf = flip(Y, cfg.flip_axis)
        items.append(item)
    return items


def epoch_batches(num_pairs: int, batch_pairs: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(num_pairs)
    return [order[i : i + batch_pairs] for i in range(0, num_pairs, batch_pairs)]
