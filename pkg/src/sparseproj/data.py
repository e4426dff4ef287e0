"""IDX digit data: loading, one-pixel jitter, one-hot targets and subsets."""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Samples as rows of pixel intensities in [0, 1] with integer labels."""

    samples: np.ndarray
    labels: np.ndarray
    provenance: str = "raw"
    image_shape: tuple = (28, 28)

    def __post_init__(self):
        if len(self.samples) != len(self.labels):
            raise ValueError(
                f"{len(self.samples)} samples but {len(self.labels)} labels"
            )
        if self.provenance not in ("raw", "jittered"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self):
        return 10


def _read(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _header(raw, fmt, what):
    size = struct.calcsize(fmt)
    if len(raw) < size:
        raise IdxFormatError(f"{what}: truncated header ({len(raw)} of {size} bytes)")
    return struct.unpack(fmt, raw[:size]), size


def load_idx(images_path, labels_path):
    """Read an IDX image/label pair; pixels are scaled by 1/255."""
    raw = _read(images_path)
    (magic, count, rows, cols), off = _header(raw, ">IIII", "images")
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"images: bad magic number {magic:#010x}")
    need = count * rows * cols
    if len(raw) - off < need:
        raise IdxFormatError(
            f"images: truncated pixel data ({len(raw) - off} of {need} bytes)"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=need, offset=off)

    raw = _read(labels_path)
    (magic, n_labels), off = _header(raw, ">II", "labels")
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"labels: bad magic number {magic:#010x}")
    if n_labels != count:
        raise IdxFormatError(f"labels: count {n_labels} does not match image count {count}")
    if len(raw) - off < count:
        raise IdxFormatError(f"labels: truncated label data ({len(raw) - off} of {count} bytes)")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=off).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"labels: value {labels.max()} outside 0..9")

    samples = pixels.reshape(count, rows * cols) / 255.0
    return LabeledDataset(samples, labels, "raw", (rows, cols))


def write_idx(ds, images_path, labels_path, compress=None):
    """Write ``ds`` back as IDX; ``compress`` defaults to the ``.gz`` suffix."""
    rows, cols = ds.image_shape
    pixels = np.rint(np.asarray(ds.samples) * 255.0).astype(np.uint8)
    img = struct.pack(">IIII", IMAGES_MAGIC, len(ds), rows, cols) + pixels.tobytes()
    lab = struct.pack(">II", LABELS_MAGIC, len(ds)) + np.asarray(ds.labels, np.uint8).tobytes()
    for path, payload in ((images_path, img), (labels_path, lab)):
        gz = str(path).endswith(".gz") if compress is None else compress
        if gz:
            payload = gzip.compress(payload, mtime=0)
        with open(path, "wb") as f:
            f.write(payload)


_SHIFTS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def shift_image(img, dr, dc):
    """Shift by ``dr`` rows and ``dc`` columns; vacated pixels become zero."""
    out = np.zeros_like(img)
    h, w = img.shape[-2:]
    src_r = slice(max(0, -dr), h - max(0, dr))
    dst_r = slice(max(0, dr), h - max(0, -dr))
    src_c = slice(max(0, -dc), w - max(0, dc))
    dst_c = slice(max(0, dc), w - max(0, -dc))
    out[..., dst_r, dst_c] = img[..., src_r, src_c]
    return out


def jitter8(ds):
    """Original samples followed by their eight one-pixel shifts."""
    if ds.provenance != "raw":
        raise ValueError("jitter8 expects a raw dataset")
    imgs = np.asarray(ds.samples).reshape(len(ds), *ds.image_shape)
    blocks = [imgs] + [shift_image(imgs, dr, dc) for dr, dc in _SHIFTS]
    samples = np.concatenate(blocks).reshape(9 * len(ds), -1)
    labels = np.tile(ds.labels, 9)
    return LabeledDataset(samples, labels, "jittered", ds.image_shape)


def one_hot(label, c=10):
    if not 0 <= label < c:
        raise ValueError(f"label {label} outside [0, {c})")
    t = np.zeros(c)
    t[label] = 1.0
    return t


def _balanced(labels, c, tol=0.2):
    counts = np.bincount(labels, minlength=c)
    mean = len(labels) / c
    return np.all(np.abs(counts - mean) <= tol * mean)


def _take(ds, idx):
    return LabeledDataset(ds.samples[idx], ds.labels[idx], ds.provenance, ds.image_shape)


def subset_indices(ds, k, seed):
    """Indices of a deterministic uniform subset of size ``k``.

    For ``k >= 500`` the class histogram must be within 20% of uniform: one
    redraw is tried, then a stratified draw is used.
    """
    if not 0 <= k <= len(ds):
        raise ValueError(f"subset size {k} exceeds dataset size {len(ds)}")
    rng = np.random.default_rng(seed)
    c = ds.n_classes
    for _ in range(2):
        idx = rng.permutation(len(ds))[:k]
        if k < 500 or _balanced(ds.labels[idx], c):
            return idx
    pools = [rng.permutation(np.flatnonzero(ds.labels == y)) for y in range(c)]
    quota = np.full(c, k // c)
    quota[rng.permutation(c)[: k % c]] += 1
    idx = np.concatenate([p[:q] for p, q in zip(pools, quota)])
    if len(idx) < k:
        rest = np.setdiff1d(np.arange(len(ds)), idx)
        idx = np.concatenate([idx, rng.permutation(rest)[: k - len(idx)]])
    return rng.permutation(idx)


def subset(ds, k, seed):
    return _take(ds, subset_indices(ds, k, seed))


def split(ds, k_train, k_eval, seed):
    """Disjoint train and evaluation subsets drawn from one deterministic subset."""
    idx = subset_indices(ds, k_train + k_eval, seed)
    return _take(ds, idx[:k_train]), _take(ds, idx[k_train:])
