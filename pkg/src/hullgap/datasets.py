"""Dataset ingestion and the random baselines.

Pixels are kept as float64 in their raw ``[0, 255]`` scale.  Images are
flattened row-major; multi-channel images are flattened channel-planar (all
of R, then G, then B), which is the CIFAR-10 on-disk order.

All randomness comes from ``numpy.random.Generator(PCG64(seed))`` so that
outputs are reproducible across platforms.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hullgap.errors import InputError, ParseError
from hullgap.hull import SampleMatrix

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_RECORD = 3073
CIFAR_SHAPE = (32, 32, 3)
CIFAR_CLASSES = 10


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class LabeledImages:
    images: np.ndarray
    labels: np.ndarray
    shape: tuple
    class_count: int = 10

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        h, w, c = self.shape
        if images.ndim != 2 or images.shape[1] != h * w * c:
            raise InputError(f"images of shape {images.shape} do not match image shape {self.shape}")
        if images.shape[0] != labels.shape[0]:
            raise InputError(f"{images.shape[0]} images but {labels.shape[0]} labels")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise InputError(f"labels must lie in [0, {self.class_count})")
        if images.size and (images.min() < 0 or images.max() > 255):
            raise InputError("pixel values must lie in [0, 255]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def n(self) -> int:
        return self.images.shape[0]

    @property
    def d(self) -> int:
        return self.images.shape[1]

    def take(self, rows) -> "LabeledImages":
        rows = np.asarray(rows)
        return LabeledImages(self.images[rows], self.labels[rows], self.shape, self.class_count)

    def as_samples(self) -> SampleMatrix:
        return SampleMatrix(self.images, bounds=(0.0, 255.0))

    def image(self, i: int) -> np.ndarray:
        """Row ``i`` as an ``h x w x c`` array."""
        return unflatten(self.images[i], self.shape)


def unflatten(row, shape) -> np.ndarray:
    h, w, c = shape
    row = np.asarray(row)
    if c == 1:
        return row.reshape(h, w, 1)
    return row.reshape(c, h, w).transpose(1, 2, 0)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    data: np.ndarray
    source: str = "imported"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InputError(f"feature matrix must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InputError("feature matrix contains non-finite entries")
        if self.source not in ("pixel", "wavelet", "imported"):
            raise InputError(f"unknown source tag {self.source!r}")
        object.__setattr__(self, "data", data)

    def as_samples(self) -> SampleMatrix:
        return SampleMatrix(self.data)


def _read(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


# --- MNIST IDX -----------------------------------------------------------

def _idx_header(buf: bytes, magic: int, ndims: int, what: str):
    need = 4 * (1 + ndims)
    if len(buf) >= 4:
        got = struct.unpack(">I", buf[:4])[0]
        if got != magic:
            raise ParseError(f"{what}: wrong magic {got} at offset 0, expected {magic}", offset=0)
    if len(buf) < need:
        raise ParseError(f"{what}: truncated header, expected {need} bytes, got {len(buf)}", offset=len(buf))
    return struct.unpack(f">{ndims}I", buf[4:need]), need


def parse_idx_images(buf: bytes):
    (n, rows, cols), start = _idx_header(buf, IDX_IMAGES_MAGIC, 3, "images")
    expected = n * rows * cols
    actual = len(buf) - start
    if actual != expected:
        kind = "truncated payload" if actual < expected else "trailing bytes in payload"
        raise ParseError(
            f"images: {kind} at offset {start}: expected {expected} bytes, got {actual}",
            offset=start + min(actual, expected))
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=start)
    return pixels.reshape(n, rows * cols).astype(np.float64), (rows, cols)


def parse_idx_labels(buf: bytes) -> np.ndarray:
    (n,), start = _idx_header(buf, IDX_LABELS_MAGIC, 1, "labels")
    actual = len(buf) - start
    if actual != n:
        kind = "truncated payload" if actual < n else "trailing bytes in payload"
        raise ParseError(
            f"labels: {kind} at offset {start}: expected {n} bytes, got {actual}",
            offset=start + min(actual, n))
    return np.frombuffer(buf, dtype=np.uint8, offset=start).astype(np.int64)


def load_mnist_idx(images_path, labels_path) -> LabeledImages:
    """Read an MNIST image/label IDX pair (optionally gzipped)."""
    images, (rows, cols) = parse_idx_images(_read(images_path))
    labels = parse_idx_labels(_read(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise ParseError(
            f"image/label count mismatch: {images.shape[0]} images (offset 4 of images file) "
            f"vs {labels.shape[0]} labels (offset 4 of labels file)", offset=4)
    if labels.size and labels.max() >= 10:
        bad = int(np.argmax(labels >= 10))
        raise ParseError(f"labels: value {labels[bad]} >= 10 at offset {8 + bad}", offset=8 + bad)
    return LabeledImages(images, labels, (rows, cols, 1))


def idx_images_bytes(images, rows: int, cols: int) -> bytes:
    px = np.asarray(images).reshape(-1, rows * cols)
    return struct.pack(">IIII", IDX_IMAGES_MAGIC, px.shape[0], rows, cols) + _to_u8(px).tobytes()


def idx_labels_bytes(labels) -> bytes:
    lab = np.asarray(labels).ravel()
    return struct.pack(">II", IDX_LABELS_MAGIC, lab.size) + _to_u8(lab).tobytes()


def write_mnist_idx(data: LabeledImages, images_path, labels_path) -> None:
    h, w, c = data.shape
    if c != 1:
        raise InputError("IDX export supports single-channel images only")
    Path(images_path).write_bytes(idx_images_bytes(data.images, h, w))
    Path(labels_path).write_bytes(idx_labels_bytes(data.labels))


def _to_u8(values) -> np.ndarray:
    v = np.asarray(values)
    if v.size and (v.min() < 0 or v.max() > 255 or np.any(v != np.round(v))):
        raise InputError("values must be integers in [0, 255] for byte export")
    return v.astype(np.uint8)


# --- CIFAR-10 binary -----------------------------------------------------

def parse_cifar10_bin(buf: bytes) -> LabeledImages:
    """Records of one label byte followed by 3072 channel-planar pixel bytes."""
    if len(buf) % CIFAR_RECORD:
        raise ParseError(
            f"size not multiple of {CIFAR_RECORD}: {len(buf)} bytes "
            f"({len(buf) % CIFAR_RECORD} trailing bytes at offset {len(buf) - len(buf) % CIFAR_RECORD})",
            offset=len(buf) - len(buf) % CIFAR_RECORD)
    recs = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = recs[:, 0].astype(np.int64)
    if labels.size and labels.max() >= CIFAR_CLASSES:
        bad = int(np.argmax(labels >= CIFAR_CLASSES))
        raise ParseError(
            f"label {labels[bad]} >= {CIFAR_CLASSES} in record {bad} at offset {bad * CIFAR_RECORD}",
            offset=bad * CIFAR_RECORD)
    return LabeledImages(recs[:, 1:].astype(np.float64), labels, CIFAR_SHAPE)


def load_cifar10_bin(paths) -> LabeledImages:
    """Read and concatenate CIFAR-10 binary batch files in the given order."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    parts = [parse_cifar10_bin(_read(p)) for p in paths]
    if not parts:
        raise InputError("no CIFAR-10 batch files given")
    return LabeledImages(
        np.concatenate([p.images for p in parts]),
        np.concatenate([p.labels for p in parts]),
        CIFAR_SHAPE,
    )


def cifar10_bytes(data: LabeledImages) -> bytes:
    if data.shape != CIFAR_SHAPE:
        raise InputError(f"CIFAR-10 records need shape {CIFAR_SHAPE}, got {data.shape}")
    recs = np.concatenate([_to_u8(data.labels)[:, None], _to_u8(data.images)], axis=1)
    return recs.tobytes()


# --- feature matrices ----------------------------------------------------

def parse_feature_csv(text: str) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"ragged row at line {lineno}: {len(fields)} fields, expected {width}", offset=lineno)
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ParseError(f"bad number at line {lineno}: {exc}", offset=lineno) from None
    if not rows:
        raise ParseError("empty CSV feature matrix", offset=0)
    return np.array(rows, dtype=np.float64)


def parse_feature_raw(buf: bytes) -> np.ndarray:
    """16-byte header of two little-endian u64 counts ``n, d``, then f64 payload."""
    if len(buf) < 16:
        raise ParseError(f"truncated header: expected 16 bytes, got {len(buf)}", offset=len(buf))
    n, d = struct.unpack("<QQ", buf[:16])
    expected = n * d * 8
    if len(buf) - 16 != expected:
        raise ParseError(
            f"header/payload mismatch: header says {n}x{d} ({expected} bytes), "
            f"payload has {len(buf) - 16} bytes at offset 16", offset=16)
    return np.frombuffer(buf, dtype="<f8", offset=16).reshape(n, d).astype(np.float64)


def load_feature_matrix(path, format: str = "csv") -> FeatureMatrix:
    if format == "csv":
        data = parse_feature_csv(Path(path).read_text())
    elif format == "raw-f64":
        data = parse_feature_raw(_read(path))
    else:
        raise InputError(f"unknown feature format {format!r}")
    if not np.all(np.isfinite(data)):
        raise ParseError("feature matrix contains non-finite values")
    return FeatureMatrix(data, "imported")


def feature_raw_bytes(data) -> bytes:
    a = np.asarray(data, dtype="<f8")
    return struct.pack("<QQ", a.shape[0], a.shape[1]) + a.tobytes()


def save_feature_matrix(data, path, format: str = "csv") -> None:
    a = np.asarray(data, dtype=np.float64)
    if format == "csv":
        Path(path).write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in a))
    elif format == "raw-f64":
        Path(path).write_bytes(feature_raw_bytes(a))
    else:
        raise InputError(f"unknown feature format {format!r}")


# --- subsets and baselines -------------------------------------------------

def subsample(data: LabeledImages, count: int | None, seed: int):
    """Uniform draw without replacement; returns ``(subset, sorted indices)``."""
    if count is None or count >= data.n:
        if count is not None and count > data.n:
            raise InputError(f"requested {count} samples from a dataset of {data.n}")
        idx = np.arange(data.n)
    else:
        idx = np.sort(rng_for(seed).choice(data.n, size=count, replace=False))
    return data.take(idx), idx


def shuffle_pixels(train: LabeledImages, test: LabeledImages | None = None, seed: int = 0):
    """Shuffle all pixel values of all images under one global permutation.

    Training and test images are concatenated, every pixel position of the
    combined tensor is permuted (Fisher-Yates driven by PCG64), and the
    result is split back.  Labels are unchanged.  Returns the shuffled
    training set, or a ``(train, test)`` pair when ``test`` is given.
    """
    parts = [train] if test is None else [train, test]
    if any(p.d != train.d for p in parts):
        raise InputError("datasets must have the same image size")
    flat = np.concatenate([p.images.ravel() for p in parts])
    flat = flat[rng_for(seed).permutation(flat.size)]
    out = []
    start = 0
    for p in parts:
        size = p.images.size
        out.append(LabeledImages(flat[start:start + size].reshape(p.images.shape), p.labels, p.shape, p.class_count))
        start += size
    return out[0] if test is None else tuple(out)


def random_dataset(n: int, d: int, lo: float = 0.0, hi: float = 255.0, seed: int = 0) -> FeatureMatrix:
    """I.i.d. uniform points in ``[lo, hi]^d``."""
    if n < 1 or d < 1:
        raise InputError("n and d must be >= 1")
    if not lo < hi:
        raise InputError(f"invalid bounds: lo={lo} must be < hi={hi}")
    return FeatureMatrix(rng_for(seed).uniform(lo, hi, size=(n, d)), "pixel")


def per_class_split(data: LabeledImages) -> dict:
    """Map each present class to the sample matrix of its rows, in original order."""
    return {int(c): SampleMatrix(data.images[data.labels == c])
            for c in np.unique(data.labels)}
