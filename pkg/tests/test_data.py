import numpy as np
import pytest

from sfdma.data import Dataset, load_idx, make_split, make_synthetic, simplex_vertices, write_idx
from sfdma.errors import InvalidInputError, ParseError


def test_same_seed_same_dataset():
    a = make_synthetic(4, 8, 20, 0.3, seed=5)
    b = make_synthetic(4, 8, 20, 0.3, seed=5)
    assert a.features.tobytes() == b.features.tobytes()
    np.testing.assert_array_equal(a.labels, b.labels)
    c = make_synthetic(4, 8, 20, 0.3, seed=6)
    assert not np.array_equal(a.features, c.features)


def test_label_histogram_exact():
    d = make_synthetic(5, 8, 37, 0.5, seed=1)
    np.testing.assert_array_equal(np.bincount(d.labels, minlength=5), 37)


def test_zero_spread_is_linearly_separable():
    d = make_synthetic(4, 8, 25, 0.0, seed=2)
    # least-squares one-vs-rest linear classifier with bias
    x = np.hstack([d.features, np.ones((len(d), 1))])
    y = np.eye(4)[d.labels]
    w, *_ = np.linalg.lstsq(x, y, rcond=None)
    assert np.mean(np.argmax(x @ w, axis=1) == d.labels) == 1.0


def test_split_shares_class_means():
    tr, te = make_split(3, 6, [200, 200], 0.1, seed=3)
    for c in range(3):
        diff = tr.features[tr.labels == c].mean(0) - te.features[te.labels == c].mean(0)
        assert np.linalg.norm(diff) < 0.1


def test_simplex_geometry():
    v = simplex_vertices(4, 10, np.random.default_rng(0))
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
    g = v @ v.T
    off = g[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, -1.0 / 3.0, atol=1e-12)


def test_invalid_specs():
    with pytest.raises(InvalidInputError):
        make_synthetic(1, 8, 10, 0.3, seed=0)
    with pytest.raises(InvalidInputError):
        make_synthetic(4, 8, 0, 0.3, seed=0)
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((2, 3)), [0, 5], 3)


def test_idx_two_image_fixture(tmp_path):
    imgs = np.zeros((2, 28, 28), dtype=np.uint8)
    imgs[0, 0, 0] = 255
    imgs[1, 27, 27] = 51
    write_idx(imgs, [3, 7], tmp_path / "i.idx", tmp_path / "l.idx")
    d = load_idx(tmp_path / "i.idx", tmp_path / "l.idx", n_classes=10)
    assert len(d) == 2 and d.input_dim == 784
    assert d.features[0, 0] == 1.0 and d.features[1, -1] == pytest.approx(0.2)
    np.testing.assert_array_equal(d.labels, [3, 7])
    assert d.features.min() >= 0 and d.features.max() <= 1


def test_idx_errors(tmp_path):
    imgs = np.zeros((2, 4, 4), dtype=np.uint8)
    write_idx(imgs, [0, 1], tmp_path / "i.idx", tmp_path / "l.idx")
    # labels file given where images are expected: wrong magic
    with pytest.raises(ParseError):
        load_idx(tmp_path / "l.idx", tmp_path / "l.idx")
    raw = (tmp_path / "i.idx").read_bytes()
    (tmp_path / "t.idx").write_bytes(raw[:-5])
    with pytest.raises(ParseError):
        load_idx(tmp_path / "t.idx", tmp_path / "l.idx")
    write_idx(np.zeros((3, 4, 4)), [0, 1, 1], tmp_path / "i3.idx", tmp_path / "l3.idx")
    with pytest.raises(ParseError):
        load_idx(tmp_path / "i3.idx", tmp_path / "l.idx")
    (tmp_path / "short.idx").write_bytes(b"\x00\x00")
    with pytest.raises(ParseError):
        load_idx(tmp_path / "short.idx", tmp_path / "l.idx")
