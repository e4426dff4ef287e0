import gzip
import struct

import numpy as np
import pytest

from conftest import IMAGES, LABELS
from sparseproj.data import (
    IdxFormatError,
    LabeledDataset,
    jitter8,
    load_idx,
    one_hot,
    shift_image,
    split,
    subset,
    write_idx,
)


def tiny(tmp_path, n_images=3, n_labels=3, magic_img=0x803, magic_lab=0x801, cut=0):
    img = struct.pack(">IIII", magic_img, n_images, 2, 2) + bytes(range(4 * n_images))
    lab = struct.pack(">II", magic_lab, n_labels) + bytes(i % 10 for i in range(n_labels))
    ip, lp = tmp_path / "img", tmp_path / "lab"
    ip.write_bytes(img[: len(img) - cut])
    lp.write_bytes(lab)
    return ip, lp


class TestLoad:
    def test_bundled_subset(self, digits):
        assert len(digits) == 5000
        assert digits.samples.shape == (5000, 784)
        np.testing.assert_array_equal(np.bincount(digits.labels), np.full(10, 500))
        assert 0.0 <= digits.samples.min() and digits.samples.max() <= 1.0

    def test_tiny_plain_file(self, tmp_path):
        ds = load_idx(*tiny(tmp_path))
        assert ds.image_shape == (2, 2)
        np.testing.assert_allclose(ds.samples[1], np.array([4, 5, 6, 7]) / 255)

    def test_empty_file(self, tmp_path):
        ip, lp = tiny(tmp_path)
        ip.write_bytes(b"")
        with pytest.raises(IdxFormatError, match="images: truncated"):
            load_idx(ip, lp)

    def test_truncated_pixels(self, tmp_path):
        with pytest.raises(IdxFormatError, match="images: truncated pixel"):
            load_idx(*tiny(tmp_path, cut=1))

    def test_bad_magic(self, tmp_path):
        with pytest.raises(IdxFormatError, match="labels: bad magic"):
            load_idx(*tiny(tmp_path, magic_lab=0x803))

    def test_count_mismatch(self, tmp_path):
        with pytest.raises(IdxFormatError, match="does not match"):
            load_idx(*tiny(tmp_path, n_labels=2))

    def test_round_trip(self, digits, tmp_path):
        write_idx(digits, tmp_path / "i.gz", tmp_path / "l.gz")
        again = load_idx(tmp_path / "i.gz", tmp_path / "l.gz")
        np.testing.assert_array_equal(again.samples, digits.samples)
        np.testing.assert_array_equal(again.labels, digits.labels)
        original = gzip.decompress(IMAGES.read_bytes())
        assert gzip.decompress((tmp_path / "i.gz").read_bytes()) == original


class TestJitter:
    def test_sizes_and_counts(self, digits):
        small = subset(digits, 200, 0)
        big = jitter8(small)
        assert len(big) == 9 * len(small)
        assert big.provenance == "jittered"
        np.testing.assert_array_equal(np.bincount(big.labels, minlength=10), 9 * np.bincount(small.labels, minlength=10))
        np.testing.assert_array_equal(big.samples[: len(small)], small.samples)

    def test_pixel_moves_right(self):
        img = np.zeros((28, 28))
        img[5, 7] = 1.0
        out = shift_image(img, 0, 1)
        assert out[5, 8] == 1.0 and out.sum() == 1.0

    def test_shifted_out_pixel_is_dropped(self):
        img = np.zeros((28, 28))
        img[0, 27] = 1.0
        assert shift_image(img, 0, 1).sum() == 0.0

    def test_blank_image(self):
        ds = LabeledDataset(np.zeros((1, 784)), np.array([4]))
        out = jitter8(ds)
        assert len(out) == 9 and not out.samples.any()

    def test_rejects_jittered_input(self):
        ds = LabeledDataset(np.zeros((1, 784)), np.array([4]), provenance="jittered")
        with pytest.raises(ValueError):
            jitter8(ds)


class TestOneHot:
    def test_positions(self):
        np.testing.assert_array_equal(one_hot(3, 10), np.eye(10)[3])
        np.testing.assert_array_equal(one_hot(0, 10), np.eye(10)[0])

    def test_sums_to_one(self):
        assert all(one_hot(k, 10).sum() == 1 for k in range(10))

    @pytest.mark.parametrize("label", [-1, 10])
    def test_out_of_range(self, label):
        with pytest.raises(ValueError):
            one_hot(label, 10)


class TestSubset:
    def test_full_size_is_permutation(self, digits):
        s = subset(digits, len(digits), 1)
        assert not np.array_equal(s.labels, digits.labels)
        np.testing.assert_array_equal(np.sort(s.labels), np.sort(digits.labels))

    def test_deterministic(self, digits):
        a, b = subset(digits, 1000, 42), subset(digits, 1000, 42)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert len(a) == 1000

    def test_balanced(self, digits):
        counts = np.bincount(subset(digits, 1000, 3).labels, minlength=10)
        assert np.all(np.abs(counts - 100) <= 20)

    def test_too_large(self, digits):
        with pytest.raises(ValueError):
            subset(digits, 5001, 0)

    def test_split_is_disjoint(self, digits):
        tr, ev = split(digits, 300, 200, 0)
        rows = {r.tobytes() for r in tr.samples}
        assert len(tr) == 300 and len(ev) == 200
        assert not any(r.tobytes() in rows for r in ev.samples)
