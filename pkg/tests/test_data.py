import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbnclass import data
from dbnclass.numerics import RngStream


def write_bytes(path, *chunks):
    path.write_bytes(b"".join(chunks))
    return path


def test_idx_header_example(tmp_path):
    img = write_bytes(tmp_path / "i", struct.pack(">4i", 0x803, 2, 2, 2), bytes([0, 255, 10, 20, 30, 40, 50, 255]))
    lab = write_bytes(tmp_path / "l", struct.pack(">2i", 0x801, 2), bytes([3, 7]))
    d = data.load_idx(img, lab)
    assert d.features.shape == (2, 4)
    assert d.features[0, 0] == 0.0 and d.features[0, 1] == 1.0
    np.testing.assert_array_equal(d.labels, [3, 7])


def test_idx_errors(tmp_path):
    img = write_bytes(tmp_path / "i", struct.pack(">4i", 0x803, 2, 2, 2), bytes(8))
    bad_magic = write_bytes(tmp_path / "bm", struct.pack(">2i", 0x803, 2), bytes(2))
    with pytest.raises(data.IdxMagicError):
        data.load_idx(img, bad_magic)
    short = write_bytes(tmp_path / "s", struct.pack(">4i", 0x803, 2, 2, 2), bytes(7))
    lab = write_bytes(tmp_path / "l", struct.pack(">2i", 0x801, 2), bytes(2))
    with pytest.raises(data.IdxTruncatedError):
        data.load_idx(short, lab)
    lab3 = write_bytes(tmp_path / "l3", struct.pack(">2i", 0x801, 3), bytes(3))
    with pytest.raises(data.IdxCountMismatchError):
        data.load_idx(img, lab3)
    assert issubclass(data.IdxMagicError, data.DataFormatError)


@pytest.mark.parametrize("suffix", ["", ".gz"])
def test_idx_round_trip(tmp_path, suffix):
    gen = np.random.default_rng(0)
    d = data.RawDataset(gen.integers(0, 256, (7, 12)) / 255.0, gen.integers(0, 10, 7), 10)
    ip, lp = tmp_path / f"img{suffix}", tmp_path / f"lab{suffix}"
    data.write_idx(d, ip, lp, shape=(3, 4))
    back = data.load_idx(ip, lp, 10)
    assert back.features.tobytes() == d.features.tobytes()
    assert back.labels.tobytes() == d.labels.tobytes()


def test_delimited_examples(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0.0,1\n1.0,0\n")
    d = data.load_delimited(p, label_column=1)
    np.testing.assert_array_equal(d.features, [[0.0], [1.0]])
    np.testing.assert_array_equal(d.labels, [1, 0])


def test_delimited_minmax_and_constant_column(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("2,5,0\n4,5,1\n3,5,1\n")
    d = data.load_delimited(p, label_column=-1, normalization="minmax")
    np.testing.assert_array_equal(d.features[:, 0], [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(d.features[:, 1], [0.0, 0.0, 0.0])
    scaled = data.apply_minmax(np.array([[5.0, 5.0]]), (np.array([2.0, 5.0]), np.array([4.0, 5.0])))
    np.testing.assert_array_equal(scaled, [[1.0, 0.0]])


def test_isolet_width(tmp_path):
    gen = np.random.default_rng(0)
    feats = gen.random((3, 617))
    # ISOLET writes its labels with a trailing dot, e.g. "26."
    lines = [", ".join(f"{v:.4f}" for v in r) + f", {t}." for r, t in zip(feats, [1, 26, 5])]
    p = tmp_path / "isolet.data"
    p.write_text("\n".join(lines) + "\n")
    d = data.load_delimited(p, -1, classes=list(range(1, 27)))
    assert d.features.shape == (3, 617)
    np.testing.assert_array_equal(d.labels, [0, 25, 4])


def test_delimited_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,2,0\n1,0\n")
    with pytest.raises(data.RaggedRowError):
        data.load_delimited(p, -1)
    p.write_text("1,x,0\n")
    with pytest.raises(data.NonNumericCellError):
        data.load_delimited(p, -1)
    p.write_text("1,2,9\n")
    with pytest.raises(data.UnknownLabelError):
        data.load_delimited(p, -1, classes=[0, 1])
    p.write_text("1,2,-1\n")
    with pytest.raises(data.UnknownLabelError):
        data.load_delimited(p, -1)


def labelled(counts):
    labels = np.concatenate([np.full(n, k) for k, n in enumerate(counts)])
    feats = np.arange(labels.size, dtype=float)[:, None]
    return data.RawDataset(feats, labels, len(counts))


def test_subsample_examples():
    d = labelled([100, 100])
    s = data.stratified_subsample(d, 0.2, RngStream(0))
    assert np.bincount(s.labels).tolist() == [20, 20]
    s = data.stratified_subsample(labelled([70, 30]), 0.2, RngStream(0))
    assert np.bincount(s.labels).tolist() == [14, 6]
    full = data.stratified_subsample(d, 1.0, RngStream(0))
    assert sorted(full.features[:, 0]) == sorted(d.features[:, 0])
    with pytest.raises(ValueError):
        data.stratified_subsample(labelled([3, 0]), 0.5, RngStream(0))
    with pytest.raises(ValueError):
        data.stratified_subsample(d, 0.0, RngStream(0))


def test_split_examples():
    d = labelled([5, 5])
    tr, va, te = data.split(d, (0.8, 0.1, 0.1), RngStream(0))
    assert (len(tr), len(va), len(te)) == (8, 1, 1)
    assert set(tr.labels) == {0, 1}
    tr, va, te = data.split(d, (1, 0, 0), RngStream(0))
    assert len(tr) == 10 and len(va) == len(te) == 0
    with pytest.raises(ValueError):
        data.split(d, (0.5, 0.4, 0.4), RngStream(0))
    with pytest.raises(ValueError):
        data.split(d, (0, 0.5, 0.5), RngStream(0))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=1, max_size=5), st.integers(0, 10**6))
def test_split_is_disjoint_cover(counts, seed):
    d = labelled(counts)
    parts = data.split(d, (0.7, 0.2, 0.1), RngStream(seed))
    ids = np.concatenate([p.features[:, 0] for p in parts])
    assert sorted(ids) == list(range(len(d)))
    again = data.split(d, (0.7, 0.2, 0.1), RngStream(seed))
    for a, b in zip(parts, again):
        assert a.features.tobytes() == b.features.tobytes()


def test_desk_split_sizes():
    d = labelled([500] * 10)
    s = data.stratified_subsample(d, 0.7, RngStream(0))
    parts = data.split(s, (4 / 7, 1 / 7, 2 / 7), RngStream(1))
    assert [len(p) for p in parts] == [2000, 500, 1000]
    assert [np.bincount(p.labels).tolist() for p in parts] == [[200] * 10, [50] * 10, [100] * 10]


def test_row_order_across_classes():
    # Interleaving classes differently leaves every per-class index list in
    # the same relative order, so the selection is unchanged.
    gen = np.random.default_rng(0)
    labels = gen.integers(0, 3, 60)
    feats = np.arange(60, dtype=float)[:, None]
    d = data.RawDataset(feats, labels, 3)
    order = np.argsort(labels, kind="stable")
    e = d.take(order)
    a = data.stratified_subsample(d, 0.4, RngStream(4))
    b = data.stratified_subsample(e, 0.4, RngStream(4))
    assert a.features.tobytes() == b.features.tobytes()
    for p, q in zip(data.split(d, (0.6, 0.2, 0.2), RngStream(4)), data.split(e, (0.6, 0.2, 0.2), RngStream(4))):
        assert p.features.tobytes() == q.features.tobytes()


def test_binarize():
    d = data.RawDataset([[0.2, 0.5, 0.9]], [0], 1)
    np.testing.assert_array_equal(data.binarize(d).features, [[0.0, 0.0, 1.0]])
