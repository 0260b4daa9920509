import dataclasses
import json

import numpy as np
import pytest

from symmatch.geom import Mesh, PointMap, flip_x, load_shape, read_map
from symmatch.losses import LossConfig
from symmatch.model import ArchConfig, init, load_checkpoint
from symmatch.train import (
    AdamState,
    ConfigError,
    DatasetIndex,
    TrainConfig,
    adam_step,
    generate_synthetic_pair,
    load_dataset,
    make_batch,
    parse_config,
    read_log,
    resume,
    save_config,
    load_config,
    synthetic_dataset,
    train,
    write_synthetic,
)
from symmatch.train.data import epoch_batches
from symmatch.train.loop import streams, total_steps
from symmatch.train.synth import SymmetricWarp, make_template

SMALL = ArchConfig(k=4, point_widths=(8, 8, 16, 32), head_widths=(16,))


def _cfg(**kw):
    base = dict(sample_count=20, batch_pairs=2, lr=1e-3, epochs=2, arch=SMALL)
    base.update(kw)
    return TrainConfig(**base)


# ---- Adam --------------------------------------------------------------------

def _one_param(value, grad):
    p = init(ArchConfig(k=1, point_widths=(1, 1), head_widths=()), 0)
    for t in p.tensors.values():
        t.data = np.zeros_like(t.data)
        t.grad = None
    name = "point0.W"
    p[name].data = np.full(p[name].data.shape, value)
    p[name].grad = np.full(p[name].data.shape, grad)
    return p, name


def test_adam_first_step_is_sign():
    for g in (3.0, -0.02):
        p, name = _one_param(1.0, g)
        state = AdamState.zeros(p)
        adam_step(p, state, lr=1e-2)
        delta = p[name].data - 1.0
        np.testing.assert_allclose(delta, -1e-2 * g / (abs(g) + 1e-8), rtol=1e-12)
        assert state.step == 1


def test_adam_zero_grad_leaves_params():
    p, name = _one_param(2.0, 0.0)
    state = AdamState.zeros(p)
    state.m[name][:] = 1.0
    state.v[name][:] = 1.0
    before = p.to_bytes()
    adam_step(p, state, lr=0.0 + 1e-3)
    # zero gradient with non-zero moments still moves; with zero moments it must not
    p2, name2 = _one_param(2.0, 0.0)
    s2 = AdamState.zeros(p2)
    b2 = p2.to_bytes()
    adam_step(p2, s2)
    assert p2.to_bytes() == b2
    assert np.all(state.m[name] == 0.9) and np.all(state.v[name] == 0.999)
    assert p.to_bytes() != before


def test_adam_constant_gradient_converges_to_lr():
    p, name = _one_param(0.0, 0.5)
    state = AdamState.zeros(p)
    prev = p[name].data.copy()
    for _ in range(1000):
        p[name].grad = np.full(prev.shape, 0.5)
        adam_step(p, state, lr=1e-3)
        step = p[name].data - prev
        prev = p[name].data.copy()
    np.testing.assert_allclose(np.abs(step), 1e-3, rtol=1e-6)


def test_adam_nan_names_parameter():
    p, name = _one_param(0.0, np.nan)
    with pytest.raises(FloatingPointError, match=name):
        adam_step(p, AdamState.zeros(p))


def test_adam_blobs_roundtrip():
    p = init(SMALL, 0)
    s = AdamState.zeros(p)
    s.m["point0.W"][:] = 3.0
    back = AdamState.from_blobs(s.to_blobs(), 5)
    assert back.step == 5 and np.all(back.m["point0.W"] == 3.0)
    assert set(back.v) == set(s.v)


# ---- config ------------------------------------------------------------------

def test_config_defaults():
    cfg = TrainConfig()
    assert (cfg.sample_count, cfg.batch_pairs, cfg.lr) == (3000, 8, 1e-4)
    assert (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (0.9, 0.999, 1e-8)
    assert cfg.loss.tau == 0.3 and cfg.arch.k == 20 and cfg.flip_axis == 0


def test_config_roundtrip(tmp_path):
    cfg = _cfg(loss=LossConfig(mode="unsupervised_comm", gamma=0.7, comm_norm="frobenius_eps"), max_steps=9)
    save_config(tmp_path / "run.ini", cfg)
    assert load_config(tmp_path / "run.ini") == cfg


def test_config_parse_and_errors():
    cfg = parse_config("[train]\nlr = 0.01  # fast\n[loss]\nmode = nn_only\n[arch]\nk = 8\n")
    assert cfg.lr == 0.01 and cfg.loss.mode == "nn_only" and cfg.arch.k == 8
    for bad in ("[train]\nbogus = 1\n", "[weird]\n", "[train]\nlr = -1\n", "[loss]\nmode = x\n", "[train]\nepochs = two\n"):
        with pytest.raises(ConfigError):
            parse_config(bad)


# ---- synthetic data ----------------------------------------------------------

def test_synth_amplitude_zero_is_identity():
    template, deformed, gt, sym, mesh = generate_synthetic_pair(0, 60, 0.0)
    assert np.array_equal(template.positions, deformed.positions)
    assert gt == PointMap.identity(60)
    assert isinstance(mesh, Mesh)


def test_synth_symmetry_involution_and_mirror():
    template, _, _, sym, _ = generate_synthetic_pair(1, 300, 0.2)
    t = sym.targets
    assert np.array_equal(t[t], np.arange(300))
    fixed = np.flatnonzero(t == np.arange(300))
    assert np.all(np.abs(template.positions[fixed, 0]) < 1e-12)
    mirrored = template.positions[t] * [-1, 1, 1]
    assert np.max(np.abs(mirrored - template.positions)) == 0.0


def test_synth_warp_commutes_with_mirror(rng):
    warp = SymmetricWarp.random(rng, 0.3)
    p = rng.standard_normal((100, 3))
    m = np.array([-1.0, 1.0, 1.0])
    assert np.max(np.abs(warp(p * m) - warp(p) * m)) == 0.0
    assert np.mean(np.linalg.norm(warp.displacement(p), axis=1)) > 0


def test_synth_odd_size_rejected():
    with pytest.raises(ValueError):
        generate_synthetic_pair(0, 31)


def test_synth_odd_factorization_falls_back_to_cloud():
    shape, sym = make_template(2 * 53)
    assert len(shape) == 106 and np.array_equal(sym.targets[sym.targets], np.arange(106))
    np.testing.assert_array_equal(shape.positions[sym.targets] * [-1, 1, 1], shape.positions)


def test_write_synthetic_roundtrip(tmp_path):
    write_synthetic(tmp_path, 3, 40, 0.2, 0)
    index = json.loads((tmp_path / "index.json").read_text())
    assert index["pairing"] == "to_template" and len(index["shapes"]) == 4
    s = load_shape(tmp_path / "shape_000.off")
    assert len(s) == 40
    assert read_map(tmp_path / "shape_001.map") == PointMap.identity(40)


# ---- batching ----------------------------------------------------------------

def test_to_template_pair_count(tmp_path):
    write_synthetic(tmp_path, 3, 40, 0.2, 0)
    ds = load_dataset(DatasetIndex.load(tmp_path), _cfg())
    assert len(ds.pairs) == 3 and all(p.target == "template" for p in ds.pairs)


def test_all_pairs_composes_through_template(tmp_path):
    write_synthetic(tmp_path, 3, 40, 0.2, 0)
    idx = DatasetIndex.load(tmp_path)
    idx = dataclasses.replace(idx, pairing="all_pairs")
    ds = load_dataset(idx, _cfg())
    assert len(ds.pairs) == 6
    assert all(p.gt == PointMap.identity(40) for p in ds.pairs)


def test_sample_count_too_large(tmp_path):
    write_synthetic(tmp_path, 2, 40, 0.2, 0)
    with pytest.raises(ConfigError, match="sample_count"):
        load_dataset(DatasetIndex.load(tmp_path), _cfg(sample_count=41))


def test_missing_symmetry_is_config_error(tmp_path):
    write_synthetic(tmp_path, 2, 40, 0.2, 0)
    raw = json.loads((tmp_path / "index.json").read_text())
    for s in raw["shapes"]:
        s.pop("sym")
    (tmp_path / "index.json").write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="symmetry"):
        load_dataset(DatasetIndex.load(tmp_path), _cfg())
    load_dataset(DatasetIndex.load(tmp_path), _cfg(loss=LossConfig(mode="unsupervised_comm")))


def test_bad_index(tmp_path):
    with pytest.raises(ConfigError):
        DatasetIndex.load(tmp_path / "nope.json")
    (tmp_path / "index.json").write_text('{"pairing": "to_template", "shapes": []}')
    with pytest.raises(ConfigError, match="template"):
        DatasetIndex.load(tmp_path)


def test_batch_determinism_and_contents():
    ds = synthetic_dataset(3, 40, 0.2, 0)
    cfg = _cfg(loss=LossConfig(mode="unsupervised_comm"))
    a = make_batch(ds, [0, 2], cfg, np.random.default_rng(4))
    b = make_batch(ds, [0, 2], cfg, np.random.default_rng(4))
    for x, y in zip(a, b):
        assert np.array_equal(x.x.ids, y.x.ids) and np.array_equal(x.y.ids, y.y.ids)
    item = a[0]
    assert np.array_equal(item.xf.positions, flip_x(item.x).positions)
    # identity ground truth: targets are the full-resolution template positions of X's ids
    np.testing.assert_array_equal(item.pair.gt_targets, ds.shapes["template"].positions[item.x.ids])


def test_batches_mode_independent():
    ds = synthetic_dataset(3, 40, 0.2, 0)
    ids = {}
    for mode in ("nn_plus_sym_nn", "supervised_comm"):
        batch = make_batch(ds, [1, 0], _cfg(loss=LossConfig(mode=mode)), np.random.default_rng(9))
        ids[mode] = [(b.x.ids.tolist(), b.y.ids.tolist()) for b in batch]
    assert ids["nn_plus_sym_nn"] == ids["supervised_comm"]


def test_epoch_batches_cover_all_pairs():
    b = epoch_batches(7, 3, np.random.default_rng(0))
    assert [len(x) for x in b] == [3, 3, 1]
    assert sorted(np.concatenate(b).tolist()) == list(range(7))
    assert total_steps(_cfg(epochs=3, batch_pairs=3), 7) == 9
    assert total_steps(_cfg(epochs=3, batch_pairs=3, max_steps=4), 7) == 4


# ---- loop --------------------------------------------------------------------

def test_zero_epochs_checkpoint_equals_init(tmp_path):
    ds = synthetic_dataset(2, 40, 0.2, 0)
    cfg = _cfg(epochs=0)
    res = train(ds, cfg, checkpoint_path=tmp_path / "c.ckpt")
    params, _, _ = load_checkpoint(tmp_path / "c.ckpt")
    assert res.rows == []
    assert params.to_bytes() == init(SMALL, streams(cfg.seed)[0]).to_bytes()


def test_gamma_zero_matches_nn_only_bitwise():
    ds = synthetic_dataset(3, 40, 0.2, 0)
    a = train(ds, _cfg(loss=LossConfig(mode="supervised_comm", gamma=0.0)))
    b = train(ds, _cfg(loss=LossConfig(mode="nn_only")))
    assert [r["L_NN"] for r in a.rows] == [r["L_NN"] for r in b.rows]
    assert a.params.to_bytes() == b.params.to_bytes()


@pytest.mark.parametrize("mode", ["nn_only", "nn_plus_sym_nn", "supervised_comm", "unsupervised_comm"])
def test_training_deterministic_and_finite(tmp_path, mode):
    ds = synthetic_dataset(3, 40, 0.2, 0)
    cfg = _cfg(loss=LossConfig(mode=mode))
    logs = []
    for run in range(2):
        train(ds, cfg, checkpoint_path=tmp_path / f"{run}.ckpt", log_path=tmp_path / f"{run}.csv")
        rows = read_log(tmp_path / f"{run}.csv")
        logs.append([{k: v for k, v in r.items() if k != "wall_ms"} for r in rows])
        assert all(np.isfinite(r["L_total"]) for r in rows)
    assert logs[0] == logs[1] and len(logs[0]) == 4
    assert (tmp_path / "0.ckpt").read_bytes() == (tmp_path / "1.ckpt").read_bytes()


def test_log_columns(tmp_path):
    ds = synthetic_dataset(2, 40, 0.2, 0)
    train(ds, _cfg(max_steps=1), log_path=tmp_path / "log.csv")
    header = (tmp_path / "log.csv").read_text().splitlines()[0]
    assert header == "step,L_NN,L_comm,L_total,wall_ms"


def test_resume_restores_state(tmp_path):
    ds = synthetic_dataset(2, 40, 0.2, 0)
    res = train(ds, _cfg(epochs=5, max_steps=3), checkpoint_path=tmp_path / "c.ckpt")
    params, state = resume(tmp_path / "c.ckpt")
    assert params.to_bytes() == res.params.to_bytes()
    assert state.step == 3
    for k in res.state.m:
        np.testing.assert_array_equal(state.m[k], res.state.m[k])


def test_loss_decreases_on_tiny_fixture():
    ds = synthetic_dataset(2, 40, 0.2, 0)
    res = train(ds, _cfg(sample_count=40, epochs=60, loss=LossConfig(mode="nn_only")))
    first = np.mean([r["L_NN"] for r in res.rows[:5]])
    last = np.mean([r["L_NN"] for r in res.rows[-5:]])
    assert last < 0.5 * first


def test_divergence_raises():
    ds = synthetic_dataset(2, 40, 0.2, 0)
    params = init(SMALL, 0)
    params["head1.W"].data[:] = np.nan
    with pytest.raises(FloatingPointError):
        train(ds, _cfg(max_steps=2), params=params)
