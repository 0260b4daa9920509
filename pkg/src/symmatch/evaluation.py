"""Average geodesic error of vertex maps, reported ×100.

Distances are measured on the target geometry and divided by the square root
of its surface area. For meshless clouds the surface area is unknown; the
normalizer then falls back to sqrt(bounding-box surface area) / 2 and the
report says so. Absolute values are therefore only roughly comparable across
publications that may normalize differently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geom import Mesh, PointCloud, PointMap, geodesic_distances, knn_graph_geodesics

DEFAULT_KNN = 8


@dataclass
class EvalReport:
    mean_geo_err_x100: float
    per_point_errors: np.ndarray  # normalized distance ×100, one per source point
    curve: np.ndarray  # (m, 2): threshold, fraction of points with error <= threshold
    normalizer: float
    normalizer_kind: str
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "mean_geo_err_x100": self.mean_geo_err_x100,
            "median_geo_err_x100": float(np.median(self.per_point_errors)) if len(self.per_point_errors) else 0.0,
            "max_geo_err_x100": float(self.per_point_errors.max()) if len(self.per_point_errors) else 0.0,
            "points": int(len(self.per_point_errors)),
            "normalizer": self.normalizer,
            "normalizer_kind": self.normalizer_kind,
            "notes": self.notes,
        }


def normalizer_for(target: PointCloud) -> tuple[float, str]:
    if isinstance(target, Mesh) and target.m > 0:
        return float(np.sqrt(target.area())), "sqrt_area"
    ext = target.positions.max(axis=0) - target.positions.min(axis=0)
    box = 2.0 * (ext[0] * ext[1] + ext[1] * ext[2] + ext[0] * ext[2])
    return float(np.sqrt(box) / 2.0), "sqrt_bbox_area_half"


def cumulative_curve(errors: np.ndarray) -> np.ndarray:
    """Step curve at each distinct error value, starting at threshold 0."""
    if len(errors) == 0:
        return np.array([[0.0, 1.0]])
    e = np.sort(errors)
    values = np.unique(e)
    counts = np.searchsorted(e, values, side="right")
    curve = np.column_stack([values, counts / len(e)])
    if values[0] > 0:
        curve = np.vstack([[0.0, 0.0], curve])
    return curve


def _distances(target: PointCloud, sources: np.ndarray, k: int | None) -> np.ndarray:
    if isinstance(target, Mesh) and target.m > 0:
        return geodesic_distances(target, sources)
    return knn_graph_geodesics(target, k or DEFAULT_KNN, sources)


def geodesic_error(pred: PointMap, gt: PointMap, target: PointCloud, k: int | None = None) -> EvalReport:
    """Mean normalized geodesic distance between predicted and true images, ×100."""
    if len(pred) != len(gt):
        raise ValueError(f"pred has {len(pred)} entries, gt has {len(gt)}")
    n = len(target)
    for name, m in (("pred", pred), ("gt", gt)):
        if len(m) and m.targets.max() >= n:
            raise ValueError(f"{name} map points past the target's {n} vertices")
    norm, kind = normalizer_for(target)
    notes = []
    if kind != "sqrt_area":
        notes.append("meshless target: k-NN graph geodesics, bounding-box area surrogate normalizer")
    if len(gt) == 0:
        return EvalReport(0.0, np.zeros(0), cumulative_curve(np.zeros(0)), norm, kind, notes)
    uniq, inv = np.unique(gt.targets, return_inverse=True)
    D = _distances(target, uniq, k)
    d = D[inv, pred.targets]
    errors = 100.0 * d / norm
    return EvalReport(float(errors.mean()), errors, cumulative_curve(errors), norm, kind, notes)


def random_baseline(
    gt: PointMap, target: PointCloud, seed=0, k: int | None = None, override: str | None = None
) -> EvalReport:
    """Score a uniformly random total map (or, with ``override="identity"``, the index identity)."""
    n = len(target)
    if override == "identity":
        pred = PointMap(np.minimum(np.arange(len(gt)), n - 1), n)
    elif override is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        pred = PointMap(rng.integers(0, n, size=len(gt)), n)
    else:
        raise ValueError(f"unknown override {override!r}")
    return geodesic_error(pred, gt, target, k)


def write_report(path, report: EvalReport) -> tuple[Path, Path, Path]:
    """Summary JSON at ``path``; per-point CSV and curve CSV beside it."""
    path = Path(path)
    stem = path.with_suffix("") if path.suffix else path
    errors_csv = Path(f"{stem}.errors.csv")
    curve_csv = Path(f"{stem}.curve.csv")
    header = dict(report.summary())
    header["notes"] = list(header["notes"]) + [
        "errors are geodesic distances / normalizer x 100; normalizer conventions differ across benchmarks"
    ]
    path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    with open(errors_csv, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["point", "geo_err_x100"])
        for i, e in enumerate(report.per_point_errors):
            w.writerow([i, repr(float(e))])
    with open(curve_csv, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["threshold", "fraction"])
        for t, frac in report.curve:
            w.writerow([repr(float(t)), repr(float(frac))])
    return path, errors_csv, curve_csv
