"""Dataset ingestion (CSV, IDX, CIFAR-10 binary) and synthetic generators."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, LabelError, ParseError
from .netmodel import STREAM_DATA, rng_for

__all__ = [
    "Dataset",
    "zscore",
    "denormalize",
    "subsample",
    "load_csv",
    "load_idx",
    "load_cifar",
    "load_digits",
    "synth_blobs",
    "synth_covertype",
    "write_idx",
]


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_stats: tuple | None = None  # (mean, std) used by z-scoring
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.inputs) != len(self.labels):
            raise FormatError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise LabelError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return tuple(self.inputs.shape[1:])


def zscore(x):
    """Column-wise z-score; constant columns map to 0.  Returns (z, mean, std)."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    z = np.where(std > 0, (x - mean) / safe, 0.0)
    return z, mean, std


def denormalize(ds: Dataset) -> np.ndarray:
    """Undo z-scoring using the stored statistics."""
    if ds.feature_stats is None:
        return ds.inputs.copy()
    mean, std = ds.feature_stats
    return ds.inputs * std + mean


def subsample(ds: Dataset, n: int, seed: int) -> Dataset:
    """First ``n`` rows after a seeded shuffle (sampling without replacement)."""
    n = min(int(n), len(ds))
    perm = rng_for(seed, STREAM_DATA).permutation(len(ds))[:n]
    return Dataset(ds.inputs[perm], ds.labels[perm], ds.n_classes, ds.feature_stats,
                   dict(ds.meta, subsample=n, subsample_seed=seed))


def load_csv(path, label_column=-1, n_classes=None, header=False, label_base=0,
             normalize=True) -> Dataset:
    """Numeric CSV with one integer label column; features are z-scored."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for r, rec in enumerate(reader):
            if header and r == 0:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            vals = []
            for c, cell in enumerate(rec):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", row=r + 1, col=c + 1) from None
            if rows and len(vals) != len(rows[0]):
                raise ParseError(f"expected {len(rows[0])} cells, got {len(vals)}", row=r + 1)
            rows.append(vals)
    if not rows:
        raise ParseError(f"no data rows in {path}")
    table = np.array(rows)
    lab = table[:, label_column]
    feats = np.delete(table, label_column % table.shape[1], axis=1)
    if np.any(lab != np.round(lab)):
        raise LabelError("labels must be integers")
    labels = lab.astype(np.int64) - int(label_base)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= n_classes:
        raise LabelError(f"labels must lie in [{label_base}, {label_base + n_classes})")
    meta = {"source": str(path), "preprocessing": "zscore" if normalize else "none"}
    if normalize:
        z, mean, std = zscore(feats)
        return Dataset(z, labels, int(n_classes), (mean, std), meta)
    return Dataset(feats, labels, int(n_classes), None, meta)


def _open(path):
    path = str(path)
    return gzip.open(path, "rb") if path.endswith(".gz") else open(path, "rb")


def load_idx(images_path, labels_path, n_classes=10) -> Dataset:
    """IDX image/label pair (MNIST layout); pixels scaled to [0, 1], shape (1, rows, cols)."""
    with _open(images_path) as fh:
        img = fh.read()
    with _open(labels_path) as fh:
        lab = fh.read()
    if len(img) < 16:
        raise FormatError("truncated IDX image header")
    magic, n, rows, cols = struct.unpack_from(">IIII", img, 0)
    if magic != 0x00000803:
        raise FormatError(f"bad IDX image magic {magic:#010x}")
    if len(lab) < 8:
        raise FormatError("truncated IDX label header")
    lmagic, ln = struct.unpack_from(">II", lab, 0)
    if lmagic != 0x00000801:
        raise FormatError(f"bad IDX label magic {lmagic:#010x}")
    if ln != n:
        raise FormatError(f"{n} images but {ln} labels")
    if len(img) != 16 + n * rows * cols or len(lab) != 8 + n:
        raise FormatError("IDX payload size does not match header")
    pix = np.frombuffer(img, dtype=np.uint8, offset=16).reshape(n, 1, rows, cols) / 255.0
    labels = np.frombuffer(lab, dtype=np.uint8, offset=8).astype(np.int64)
    return Dataset(pix, labels, n_classes, None, {"source": str(images_path), "preprocessing": "scale01"})


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images (n, rows, cols) and labels in IDX layout."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", 0x803, n, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", 0x801, n) + np.asarray(labels, np.uint8).tobytes())


def load_cifar(paths) -> Dataset:
    """CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    xs, ys = [], []
    for p in paths:
        raw = Path(p).read_bytes()
        if len(raw) % 3073:
            raise FormatError(f"{p}: size {len(raw)} is not a multiple of 3073")
        rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3073)
        ys.append(rec[:, 0].astype(np.int64))
        xs.append(rec[:, 1:].reshape(-1, 3, 32, 32) / 255.0)
    return Dataset(np.concatenate(xs), np.concatenate(ys), 10, None, {"preprocessing": "scale01"})


def load_digits() -> Dataset:
    """scikit-learn's bundled 8x8 digits as (1, 8, 8) images in [0, 1]."""
    from sklearn.datasets import load_digits as _ld

    b = _ld()
    return Dataset(b.images[:, None] / 16.0, b.target, 10, None,
                   {"source": "sklearn digits", "preprocessing": "scale01"})


def synth_blobs(n, dim, n_classes, seed, separation=10.0) -> Dataset:
    """Unit-variance Gaussian blobs; neighbouring class means are ``separation`` apart.

    Means sit on a circle in the first two coordinates (on a line when
    ``dim == 1``).
    """
    if not n >= n_classes >= 1:
        raise ValueError("need n >= n_classes >= 1")
    rng = rng_for(seed, STREAM_DATA, 7)
    means = np.zeros((n_classes, dim))
    if n_classes > 1:
        if dim == 1:
            means[:, 0] = separation * np.arange(n_classes)
        else:
            r = separation / (2 * np.sin(np.pi / n_classes))
            ang = 2 * np.pi * np.arange(n_classes) / n_classes
            means[:, 0], means[:, 1] = r * np.cos(ang), r * np.sin(ang)
    labels = rng.permutation(np.arange(n) % n_classes)
    x = means[labels] + rng.standard_normal((n, dim))
    return Dataset(x, labels, n_classes, None, {"source": "blobs", "means": means.tolist()})


def synth_covertype(n, seed, teacher_seed=2024) -> Dataset:
    """Covertype-shaped synthetic table: 54 features, 7 classes.

    Ten correlated continuous columns, a 4-way and a 40-way one-hot block,
    and labels from a fixed random ReLU teacher network (``teacher_seed``)
    applied to the raw features.  Features are z-scored.
    """
    rng = rng_for(seed, STREAM_DATA, 54)
    trng = rng_for(teacher_seed, STREAM_DATA, 77)
    mix = trng.standard_normal((10, 10)) / np.sqrt(10)
    cont = rng.standard_normal((n, 10)) @ mix
    wild = np.eye(4)[rng.integers(0, 4, n)]
    soil = np.eye(40)[rng.integers(0, 40, n)]
    raw = np.concatenate([cont, wild, soil], axis=1)
    w1 = trng.standard_normal((54, 24))
    w1[10:] *= 2.0
    w2 = trng.standard_normal((24, 7))
    logits = np.maximum(raw @ w1, 0.0) @ w2
    labels = np.argmax(logits, axis=1)
    z, mean, std = zscore(raw)
    return Dataset(z, labels, 7, (mean, std), {"source": "synthetic covertype", "teacher_seed": teacher_seed,
                                               "preprocessing": "zscore"})
