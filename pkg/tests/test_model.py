import numpy as np
import pytest

from symmatch import autodiff as ad
from symmatch.geom import PointCloud, normalize
from symmatch.model import ArchConfig, EncoderParams, embed, init, load_checkpoint, save_checkpoint

from conftest import grad_check

SMALL = ArchConfig(k=4, point_widths=(6, 6, 8, 12), head_widths=(10, 8))


def _cloud(rng, n):
    return normalize(PointCloud(rng.standard_normal((n, 3))))[0]


def test_init_deterministic():
    a, b = init(ArchConfig(), 7), init(ArchConfig(), 7)
    assert a.to_bytes() == b.to_bytes()
    assert init(ArchConfig(), 0).to_bytes() != init(ArchConfig(), 1).to_bytes()


def test_init_first_layer_std():
    w = init(ArchConfig(), 0)["point0.W"].data
    assert w.shape == (3, 64)
    assert abs(w.std() - np.sqrt(2 / 3)) < 0.2 * np.sqrt(2 / 3)


def test_init_biases_zero_and_shapes():
    p = init(ArchConfig(), 0)
    for name, shape in ArchConfig().layer_shapes().items():
        assert p[name].data.shape == shape
        if name.endswith(".b"):
            assert not p[name].data.any()
    assert p["head0.W_local"].data.shape == (128, 512)
    assert p["head0.W_global"].data.shape == (1024, 512)
    assert p["head2.W"].data.shape == (256, 20)


def test_arch_validation():
    with pytest.raises(ValueError):
        ArchConfig(k=0)
    with pytest.raises(ValueError):
        ArchConfig(point_widths=(64, 0, 8))


def test_single_point():
    out = embed(init(ArchConfig(), 0), PointCloud([[0.1, 0.2, 0.3]]))
    assert out.shape == (1, 20) and np.all(np.isfinite(out.data))


def test_permutation_equivariance(rng):
    params = init(ArchConfig(), 3)
    c = _cloud(rng, 200)
    perm = rng.permutation(200)
    a = embed(params, c).data
    b = embed(params, c.positions[perm]).data
    np.testing.assert_allclose(b, a[perm], rtol=0, atol=1e-12)


def test_duplicate_points_identical_rows(rng):
    params = init(ArchConfig(), 3)
    pos = _cloud(rng, 50).positions.copy()
    pos[7] = pos[30]
    out = embed(params, pos).data
    np.testing.assert_array_equal(out[7], out[30])


def test_global_context_reaches_every_row(rng):
    params = init(SMALL, 1)
    c = _cloud(rng, 20).positions
    base = embed(params, c).data
    moved = c.copy()
    moved[0] *= 3.0
    changed = embed(params, moved).data
    # rows other than the moved point can change only through the pooled feature
    assert not np.array_equal(base[1:], changed[1:])


def test_output_envelope(rng):
    out = embed(init(ArchConfig(), 0), _cloud(rng, 500)).data
    assert np.abs(out).max() < 1e3


def test_gradients_match_finite_differences(rng):
    params = init(SMALL, 5)
    names = list(params.tensors)
    for name in names:
        if name.endswith(".b"):
            params[name].data[:] = rng.standard_normal(params[name].data.shape) * 0.1
    pts = _cloud(rng, 8).positions
    target = rng.standard_normal((8, 4))

    def build(leaves):
        p = EncoderParams(SMALL, dict(zip(names, leaves)))
        return ad.frobenius_sq(ad.sub(embed(p, pts), ad.Tensor(target)))

    assert grad_check(build, [params[n].data for n in names]) < 1e-4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_debug_mode_names_layer(rng):
    params = init(SMALL, 0)
    params["point1.W"].data[0, 0] = np.inf
    ad.set_debug(True)
    try:
        with pytest.raises(FloatingPointError, match="point"):
            embed(params, _cloud(rng, 5))
    finally:
        ad.set_debug(False)


def test_checkpoint_roundtrip(tmp_path):
    p = init(SMALL, 9)
    extra = {"m.point0.W": np.arange(18.0).reshape(3, 6)}
    save_checkpoint(tmp_path / "c.ckpt", p, extra, meta={"adam_step": 4})
    q, ex, meta = load_checkpoint(tmp_path / "c.ckpt")
    assert q.arch == SMALL and q.to_bytes() == p.to_bytes()
    np.testing.assert_array_equal(ex["m.point0.W"], extra["m.point0.W"])
    assert meta == {"adam_step": "4"}


def test_checkpoint_rejects_bad_files(tmp_path):
    (tmp_path / "x").write_bytes(b"hello\n")
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(tmp_path / "x")
    save_checkpoint(tmp_path / "c", init(SMALL, 0))
    raw = (tmp_path / "c").read_bytes().replace(b"version=1", b"version=9")
    (tmp_path / "v").write_bytes(raw)
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(tmp_path / "v")
    raw = (tmp_path / "c").read_bytes().replace(b"version=1\n", b"")
    (tmp_path / "nv").write_bytes(raw)
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(tmp_path / "nv")
