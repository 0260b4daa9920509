import json

import numpy as np
import pytest

from symmatch.evaluation import (
    cumulative_curve,
    geodesic_error,
    normalizer_for,
    random_baseline,
    write_report,
)
from symmatch.geom import DisconnectedGraphError, Mesh, PointCloud, PointMap

from conftest import floyd_warshall, random_mesh


def _strip(n):
    """Unit-edge chain 0..n-1 along x, carried by a second row of vertices (a triangle strip)."""
    top = [[i, 0.0, 0.0] for i in range(n)]
    bottom = [[i, 1.0, 0.0] for i in range(n)]
    faces = []
    for i in range(n - 1):
        faces.append((i, i + 1, n + i))
        faces.append((i + 1, n + i + 1, n + i))
    return Mesh(np.array(top + bottom), faces=np.array(faces))


def test_pred_equals_gt_is_zero(rng):
    m = random_mesh(rng, 30)
    gt = PointMap(rng.integers(0, 30, 50), 30)
    r = geodesic_error(gt, gt, m)
    assert r.mean_geo_err_x100 == 0.0 and np.all(r.per_point_errors == 0)


def test_chain_hand_value():
    m = _strip(100)  # area 99, edge between i and i+1 has length 1
    gt = PointMap(np.arange(100), 200)
    pred_t = np.arange(100)
    pred_t[42] = 43
    r = geodesic_error(PointMap(pred_t, 200), gt, m)
    assert r.normalizer == np.sqrt(99.0) and r.normalizer_kind == "sqrt_area"
    assert r.mean_geo_err_x100 == pytest.approx((1.0 / np.sqrt(99.0)) * 100 / 100, rel=1e-14)


def test_matches_floyd_warshall_oracle(rng):
    m = random_mesh(rng, 40)
    D = floyd_warshall(40, m.edges(), m.positions)
    gt = PointMap(rng.integers(0, 40, 60), 40)
    pred = PointMap(rng.integers(0, 40, 60), 40)
    expected = np.mean(D[gt.targets, pred.targets]) / np.sqrt(m.area()) * 100
    r = geodesic_error(pred, gt, m)
    assert r.mean_geo_err_x100 == pytest.approx(expected, rel=1e-12)


def test_zero_iff_equal(rng):
    m = random_mesh(rng, 20)
    gt = PointMap(np.arange(20), 20)
    t = np.arange(20)
    t[3] = 4
    assert geodesic_error(PointMap(t, 20), gt, m).mean_geo_err_x100 > 0


def test_scale_invariance(rng):
    m = random_mesh(rng, 30)
    big = Mesh(m.positions * 7.5, faces=m.faces)
    gt, pred = PointMap(rng.integers(0, 30, 30), 30), PointMap(rng.integers(0, 30, 30), 30)
    a = geodesic_error(pred, gt, m).mean_geo_err_x100
    b = geodesic_error(pred, gt, big).mean_geo_err_x100
    assert b == pytest.approx(a, rel=1e-12)


def test_curve_properties(rng):
    m = random_mesh(rng, 30)
    r = geodesic_error(PointMap(rng.integers(0, 30, 80), 30), PointMap(rng.integers(0, 30, 80), 30), m)
    c = r.curve
    assert np.all(np.diff(c[:, 0]) > 0) and np.all(np.diff(c[:, 1]) >= 0)
    assert c[-1, 1] == 1.0 and c[-1, 0] == r.per_point_errors.max()
    assert np.all(r.per_point_errors >= 0)
    np.testing.assert_array_equal(cumulative_curve(np.array([0.0, 0.0, 2.0])), [[0.0, 2 / 3], [2.0, 1.0]])


def test_size_mismatch_and_range(rng):
    m = random_mesh(rng, 10)
    with pytest.raises(ValueError):
        geodesic_error(PointMap([0, 1], 10), PointMap([0], 10), m)
    with pytest.raises(ValueError):
        geodesic_error(PointMap([12], 20), PointMap([0], 20), m)


def test_disconnected_target():
    pos = np.vstack([np.eye(3), np.eye(3) + 5])
    m = Mesh(pos, faces=[[0, 1, 2], [3, 4, 5]])
    with pytest.raises(DisconnectedGraphError):
        geodesic_error(PointMap([0], 6), PointMap([4], 6), m)


def test_meshless_target_uses_bbox_surrogate():
    x = np.linspace(0, 1, 11)
    pos = np.column_stack([x, x * 0.5, np.zeros(11)])
    c = PointCloud(pos)
    norm, kind = normalizer_for(c)
    assert kind == "sqrt_bbox_area_half"
    assert norm == pytest.approx(np.sqrt(2 * (1.0 * 0.5)) / 2)
    r = geodesic_error(PointMap([1], 11), PointMap([0], 11), c, k=2)
    step = np.hypot(0.1, 0.05)
    assert r.mean_geo_err_x100 == pytest.approx(step / norm * 100, rel=1e-12)
    assert r.notes


def test_identity_override_is_zero_on_identity_gt(rng):
    m = random_mesh(rng, 25)
    assert random_baseline(PointMap.identity(25), m, override="identity").mean_geo_err_x100 == 0.0


def test_random_baseline_seeds_differ(rng):
    m = random_mesh(rng, 25)
    gt = PointMap.identity(25)
    assert random_baseline(gt, m, 0).mean_geo_err_x100 != random_baseline(gt, m, 1).mean_geo_err_x100


def test_random_baseline_monte_carlo(rng):
    m = random_mesh(rng, 50)
    gt = PointMap(rng.integers(0, 50, 50), 50)
    means = [random_baseline(gt, m, seed).mean_geo_err_x100 for seed in range(20)]
    # oracle: expected error of a uniform random target, computed directly
    D = floyd_warshall(50, m.edges(), m.positions)
    expected = np.mean(D[gt.targets].mean(axis=1)) / np.sqrt(m.area()) * 100
    stderr = np.std(means, ddof=1) / np.sqrt(len(means))
    assert abs(np.mean(means) - expected) <= 2 * stderr


def test_write_report(tmp_path, rng):
    m = random_mesh(rng, 20)
    r = geodesic_error(PointMap(rng.integers(0, 20, 15), 20), PointMap(rng.integers(0, 20, 15), 20), m)
    paths = write_report(tmp_path / "rep.json", r)
    summary = json.loads(paths[0].read_text())
    assert summary["mean_geo_err_x100"] == r.mean_geo_err_x100 and summary["points"] == 15
    assert summary["normalizer_kind"] == "sqrt_area"
    errs = paths[1].read_text().splitlines()
    assert errs[0] == "point,geo_err_x100" and len(errs) == 16
    assert paths[2].read_text().startswith("threshold,fraction")
