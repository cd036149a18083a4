import gzip
import struct

import numpy as np
import pytest

from hullgap.datasets import (
    FeatureMatrix,
    LabeledImages,
    cifar10_bytes,
    feature_raw_bytes,
    idx_images_bytes,
    idx_labels_bytes,
    load_cifar10_bin,
    load_feature_matrix,
    load_mnist_idx,
    parse_cifar10_bin,
    parse_feature_csv,
    parse_feature_raw,
    parse_idx_images,
    parse_idx_labels,
    per_class_split,
    random_dataset,
    save_feature_matrix,
    shuffle_pixels,
    subsample,
    unflatten,
    write_mnist_idx,
)
from hullgap.errors import InputError, ParseError

# Two 2x3 images and their labels, written out byte by byte.
IDX_IMAGES = bytes.fromhex("00000803" "00000002" "00000002" "00000003"
                           "000102030405" "ff10200a0b0c")
IDX_LABELS = bytes.fromhex("00000801" "00000002" "0307")


def tiny_mnist():
    px = np.array([[0, 1, 2, 3, 4, 5], [255, 16, 32, 10, 11, 12]], dtype=float)
    return LabeledImages(px, [3, 7], (2, 3, 1))


def tiny_cifar(n=3, seed=0):
    rng = np.random.default_rng(seed)
    return LabeledImages(rng.integers(0, 256, (n, 3072)).astype(float), rng.integers(0, 10, n), (32, 32, 3))


# --- IDX -------------------------------------------------------------------

def test_idx_golden_parse():
    images, (rows, cols) = parse_idx_images(IDX_IMAGES)
    assert (rows, cols) == (2, 3)
    np.testing.assert_array_equal(images, tiny_mnist().images)
    np.testing.assert_array_equal(parse_idx_labels(IDX_LABELS), [3, 7])


def test_idx_golden_write():
    data = tiny_mnist()
    assert idx_images_bytes(data.images, 2, 3) == IDX_IMAGES
    assert idx_labels_bytes(data.labels) == IDX_LABELS


def test_idx_file_roundtrip(tmp_path):
    data = tiny_mnist()
    write_mnist_idx(data, tmp_path / "img", tmp_path / "lab")
    assert (tmp_path / "img").read_bytes() == IDX_IMAGES
    back = load_mnist_idx(tmp_path / "img", tmp_path / "lab")
    np.testing.assert_array_equal(back.images, data.images)
    np.testing.assert_array_equal(back.labels, data.labels)
    assert back.shape == (2, 3, 1)


def test_idx_gzip(tmp_path):
    (tmp_path / "img.gz").write_bytes(gzip.compress(IDX_IMAGES))
    (tmp_path / "lab.gz").write_bytes(gzip.compress(IDX_LABELS))
    assert load_mnist_idx(tmp_path / "img.gz", tmp_path / "lab.gz").n == 2


def test_idx_wrong_magic():
    with pytest.raises(ParseError, match="wrong magic 2051") as info:
        parse_idx_labels(IDX_IMAGES)
    assert info.value.offset == 0
    with pytest.raises(ParseError, match="wrong magic 2049"):
        parse_idx_images(IDX_LABELS)


def test_idx_truncated_payload():
    with pytest.raises(ParseError, match="truncated payload at offset 16: expected 12 bytes, got 11"):
        parse_idx_images(IDX_IMAGES[:-1])
    with pytest.raises(ParseError, match="expected 2 bytes, got 1"):
        parse_idx_labels(IDX_LABELS[:-1])


def test_idx_truncated_header_and_trailing():
    with pytest.raises(ParseError, match="truncated header"):
        parse_idx_images(IDX_IMAGES[:10])
    with pytest.raises(ParseError, match="trailing bytes"):
        parse_idx_images(IDX_IMAGES + b"\x00")


def test_idx_count_mismatch(tmp_path):
    (tmp_path / "img").write_bytes(IDX_IMAGES)
    (tmp_path / "lab").write_bytes(bytes.fromhex("00000801" "00000001" "03"))
    with pytest.raises(ParseError, match="count mismatch"):
        load_mnist_idx(tmp_path / "img", tmp_path / "lab")


def test_idx_label_out_of_range(tmp_path):
    (tmp_path / "img").write_bytes(IDX_IMAGES)
    (tmp_path / "lab").write_bytes(bytes.fromhex("00000801" "00000002" "030a"))
    with pytest.raises(ParseError, match="offset 9"):
        load_mnist_idx(tmp_path / "img", tmp_path / "lab")


# --- CIFAR -----------------------------------------------------------------

def test_cifar_zero_record():
    data = parse_cifar10_bin(bytes(3073))
    assert data.n == 1 and data.labels[0] == 0 and not data.images.any()
    assert data.shape == (32, 32, 3)


def test_cifar_layout_is_channel_planar():
    rec = bytearray(3073)
    rec[0] = 4
    rec[1 + 0 * 1024 + 5] = 10       # red, row 0, col 5
    rec[1 + 1 * 1024 + 32] = 20      # green, row 1, col 0
    rec[1 + 2 * 1024 + 1023] = 30    # blue, row 31, col 31
    data = parse_cifar10_bin(bytes(rec))
    img = data.image(0)
    assert img[0, 5, 0] == 10 and img[1, 0, 1] == 20 and img[31, 31, 2] == 30
    assert img.sum() == 60


def test_cifar_roundtrip(tmp_path):
    data = tiny_cifar()
    buf = cifar10_bytes(data)
    assert len(buf) == 3 * 3073
    (tmp_path / "b1.bin").write_bytes(buf)
    (tmp_path / "b2.bin").write_bytes(buf[:3073])
    back = load_cifar10_bin([tmp_path / "b1.bin", tmp_path / "b2.bin"])
    assert back.n == 4
    np.testing.assert_array_equal(back.images[:3], data.images)
    np.testing.assert_array_equal(back.labels[3], data.labels[0])
    assert cifar10_bytes(back.take([0, 1, 2])) == buf


def test_cifar_bad_size():
    with pytest.raises(ParseError, match="size not multiple of 3073"):
        parse_cifar10_bin(bytes(3072))


def test_cifar_bad_label():
    buf = bytearray(2 * 3073)
    buf[3073] = 10
    with pytest.raises(ParseError, match="label 10 >= 10 in record 1 at offset 3073"):
        parse_cifar10_bin(bytes(buf))


# --- feature matrices ------------------------------------------------------

def test_csv_examples():
    np.testing.assert_array_equal(parse_feature_csv("1,2\n3,4"), [[1, 2], [3, 4]])
    with pytest.raises(ParseError, match="ragged row at line 2"):
        parse_feature_csv("1,2\n3,4,5\n")
    with pytest.raises(ParseError, match="bad number at line 1"):
        parse_feature_csv("1,x\n")
    with pytest.raises(ParseError, match="empty"):
        parse_feature_csv("\n\n")


def test_raw_examples():
    buf = struct.pack("<QQ", 1, 3) + bytes(24)
    np.testing.assert_array_equal(parse_feature_raw(buf), np.zeros((1, 3)))
    with pytest.raises(ParseError, match="header/payload mismatch"):
        parse_feature_raw(buf[:-8])
    with pytest.raises(ParseError, match="truncated header"):
        parse_feature_raw(buf[:8])


@pytest.mark.parametrize("fmt", ["csv", "raw-f64"])
def test_feature_roundtrip(tmp_path, fmt):
    a = np.random.default_rng(0).normal(size=(5, 4))
    save_feature_matrix(a, tmp_path / "f", fmt)
    fm = load_feature_matrix(tmp_path / "f", fmt)
    assert fm.source == "imported"
    np.testing.assert_array_equal(fm.data, a)


def test_feature_raw_bytes_layout():
    buf = feature_raw_bytes(np.array([[1.5, -2.0]]))
    assert buf[:16] == struct.pack("<QQ", 1, 2)
    assert struct.unpack("<2d", buf[16:]) == (1.5, -2.0)


def test_feature_unknown_format(tmp_path):
    with pytest.raises(InputError):
        load_feature_matrix(tmp_path / "f", "npy")


def test_feature_matrix_validation():
    with pytest.raises(InputError):
        FeatureMatrix(np.array([[np.inf]]))
    with pytest.raises(InputError):
        FeatureMatrix(np.zeros(3))


# --- labelled images -------------------------------------------------------

def test_labeled_images_validation():
    with pytest.raises(InputError):
        LabeledImages(np.zeros((1, 5)), [0], (2, 3, 1))
    with pytest.raises(InputError):
        LabeledImages(np.zeros((1, 6)), [10], (2, 3, 1))
    with pytest.raises(InputError):
        LabeledImages(np.full((1, 6), 256.0), [0], (2, 3, 1))


def test_unflatten_planar():
    row = np.arange(12)
    img = unflatten(row, (2, 2, 3))
    assert img[0, 1, 2] == 9 and img[1, 0, 0] == 2


# --- subsets, baselines, splits -------------------------------------------

def test_subsample_deterministic_and_sorted():
    data = tiny_cifar(20)
    a, ia = subsample(data, 5, seed=3)
    b, ib = subsample(data, 5, seed=3)
    np.testing.assert_array_equal(ia, ib)
    assert list(ia) == sorted(set(ia)) and len(ia) == 5
    np.testing.assert_array_equal(a.images, data.images[ia])
    with pytest.raises(InputError):
        subsample(data, 21, 0)


def test_shuffle_preserves_multiset_and_labels():
    tr, te = tiny_cifar(4, 1), tiny_cifar(2, 2)
    s_tr, s_te = shuffle_pixels(tr, te, seed=5)
    before = np.sort(np.concatenate([tr.images.ravel(), te.images.ravel()]))
    after = np.sort(np.concatenate([s_tr.images.ravel(), s_te.images.ravel()]))
    np.testing.assert_array_equal(before, after)
    np.testing.assert_array_equal(s_tr.labels, tr.labels)
    np.testing.assert_array_equal(s_te.labels, te.labels)


def test_shuffle_is_global_across_images():
    # one image all 0, another all 255: a global shuffle mixes them
    tr = LabeledImages(np.array([[0.0] * 6, [255.0] * 6]), [0, 1], (2, 3, 1))
    s = shuffle_pixels(tr, seed=0)
    assert 0 < s.images[0].sum() < 6 * 255


def test_shuffle_seeds():
    tr = tiny_cifar(3)
    np.testing.assert_array_equal(shuffle_pixels(tr, seed=1).images, shuffle_pixels(tr, seed=1).images)
    assert not np.array_equal(shuffle_pixels(tr, seed=1).images, shuffle_pixels(tr, seed=2).images)


def test_shuffle_matches_numpy_permutation():
    from hullgap.datasets import rng_for
    tr = tiny_mnist()
    perm = np.random.Generator(np.random.PCG64(9)).permutation(12)
    expected = tr.images.ravel()[perm].reshape(2, 6)
    np.testing.assert_array_equal(shuffle_pixels(tr, seed=9).images, expected)
    assert isinstance(rng_for(0).bit_generator, np.random.PCG64)


def test_random_dataset():
    fm = random_dataset(50, 7, lo=-2.0, hi=3.0, seed=4)
    assert fm.data.shape == (50, 7) and fm.data.min() >= -2 and fm.data.max() <= 3
    np.testing.assert_array_equal(fm.data, random_dataset(50, 7, -2.0, 3.0, 4).data)
    eps = 1e-9
    narrow = random_dataset(10, 2, lo=1.0 - eps, hi=1.0, seed=0)
    assert np.all(np.abs(narrow.data - (1.0 - eps)) <= eps)
    for kw in ({"lo": 1.0, "hi": 1.0}, {"lo": 2.0, "hi": 1.0}):
        with pytest.raises(InputError):
            random_dataset(3, 3, seed=0, **kw)
    with pytest.raises(InputError):
        random_dataset(0, 3)


def test_per_class_split_partition():
    data = LabeledImages(np.arange(24, dtype=float).reshape(4, 6), [1, 0, 1, 1], (2, 3, 1))
    split = per_class_split(data)
    assert sorted(split) == [0, 1]
    np.testing.assert_array_equal(split[1].data, data.images[[0, 2, 3]])
    np.testing.assert_array_equal(split[0].data, data.images[[1]])
    single = per_class_split(LabeledImages(np.zeros((3, 6)), [2, 2, 2], (2, 3, 1)))
    assert list(single) == [2] and single[2].n == 3


def test_per_class_hull_is_farther():
    from hullgap import project_to_hull
    rng = np.random.default_rng(0)
    data = LabeledImages(rng.integers(0, 256, (30, 6)).astype(float), rng.integers(0, 3, 30), (2, 3, 1))
    q = rng.uniform(0, 255, 6)
    full = project_to_hull(q, data.as_samples()).distance
    for sm in per_class_split(data).values():
        assert project_to_hull(q, sm).distance >= full - 1e-9
