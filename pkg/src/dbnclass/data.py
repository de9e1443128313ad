"""Dataset ingestion, subsampling and stratified splitting.

Two on-disk formats are understood:

* IDX (the MNIST container): big-endian int32 magic, item count and (for
  images) rows/cols, then unsigned bytes. Files ending in ``.gz`` are
  decompressed transparently. Pixels are scaled to [0, 1] by ``/255``.
* Delimited text with one label column (ISOLET, numericalised KDD'99).
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass

import numpy as np

from .classifier import LabeledDataset

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataFormatError(ValueError):
    pass


class IdxMagicError(DataFormatError):
    pass


class IdxTruncatedError(DataFormatError):
    pass


class IdxCountMismatchError(DataFormatError):
    pass


class RaggedRowError(DataFormatError):
    pass


class NonNumericCellError(DataFormatError):
    pass


class UnknownLabelError(DataFormatError):
    pass


@dataclass
class RawDataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label counts differ")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("label out of range")

    def __len__(self):
        return self.labels.shape[0]

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return RawDataset(self.features[idx], self.labels[idx], self.n_classes)

    def to_labeled(self):
        return LabeledDataset(self.features, self.labels, self.n_classes)


def _read_bytes(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_idx(buf, magic, ndims, what):
    header = 4 * (1 + ndims)
    if len(buf) < 4:
        raise IdxTruncatedError(f"{what} file shorter than its magic number")
    (got,) = struct.unpack(">i", buf[:4])
    if got != magic:
        raise IdxMagicError(f"{what} file has magic 0x{got:08x}, expected 0x{magic:08x}")
    if len(buf) < header:
        raise IdxTruncatedError(f"{what} header truncated")
    dims = struct.unpack(f">{ndims}i", buf[4:header])
    expected = int(np.prod(dims))
    payload = buf[header:]
    if len(payload) < expected:
        raise IdxTruncatedError(f"{what} payload has {len(payload)} bytes, expected {expected}")
    return dims, np.frombuffer(payload, dtype=np.uint8, count=expected)


def load_idx(image_path, label_path, n_classes=None):
    """Read an IDX image/label pair into a :class:`RawDataset`."""
    (count, rows, cols), pixels = _parse_idx(_read_bytes(image_path), IDX_IMAGE_MAGIC, 3, "image")
    (lcount,), labels = _parse_idx(_read_bytes(label_path), IDX_LABEL_MAGIC, 1, "label")
    if count != lcount:
        raise IdxCountMismatchError(f"{count} images but {lcount} labels")
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    return RawDataset(features, labels, n_classes)


def write_idx(d, image_path, label_path, shape=None):
    """Inverse of :func:`load_idx` for features that are multiples of 1/255."""
    n, width = d.features.shape
    rows, cols = shape if shape is not None else (1, width)
    if rows * cols != width:
        raise ValueError("image shape does not match feature width")
    pixels = np.rint(d.features * 255.0)
    if pixels.min() < 0 or pixels.max() > 255:
        raise ValueError("features must lie in [0, 1]")
    opener = lambda p: gzip.open(p, "wb") if str(p).endswith(".gz") else open(p, "wb")
    with opener(image_path) as f:
        f.write(struct.pack(">4i", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(pixels.astype(np.uint8).tobytes())
    with opener(label_path) as f:
        f.write(struct.pack(">2i", IDX_LABEL_MAGIC, n))
        f.write(d.labels.astype(np.uint8).tobytes())


def minmax_stats(features):
    features = np.atleast_2d(features)
    return features.min(axis=0), features.max(axis=0)


def apply_minmax(features, stats):
    """Map each column to [0, 1] with ``(lo, hi)``; constant columns become 0.

    Values outside the supplied range (e.g. test rows scaled with train
    statistics) are clipped.
    """
    lo, hi = (np.asarray(s, dtype=np.float64) for s in stats)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (features - lo) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


def load_delimited(path, label_column, delimiter=",", normalization="none", stats=None,
                   classes=None):
    """Parse a delimited numeric file with one label column.

    ``label_column`` may be negative (counted from the end). Labels must be
    nonnegative integers unless ``classes`` lists the raw label values, in
    which case a label's index in ``classes`` is used. ``normalization`` is
    ``"none"`` or ``"minmax"``; minmax uses ``stats = (lo, hi)`` when given
    (normally from the training split) and this file's own range otherwise.
    """
    if normalization not in ("none", "minmax"):
        raise ValueError(f"unknown normalization {normalization!r}")
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path} contains no rows")
    rows = []
    width = None
    for lineno, ln in enumerate(lines, 1):
        cells = [c.strip() for c in ln.split(delimiter)]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise RaggedRowError(f"line {lineno} has {len(cells)} cells, expected {width}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise NonNumericCellError(f"line {lineno} has a non-numeric cell") from None
    table = np.array(rows)
    col = label_column % width
    raw_labels = table[:, col]
    features = np.delete(table, col, axis=1)

    if classes is not None:
        lookup = {float(v): i for i, v in enumerate(classes)}
        try:
            labels = np.array([lookup[float(v)] for v in raw_labels], dtype=np.int64)
        except KeyError as e:
            raise UnknownLabelError(f"label {e.args[0]} is not among the known classes") from None
        n_classes = len(classes)
    else:
        if np.any(raw_labels < 0) or np.any(raw_labels != np.round(raw_labels)):
            raise UnknownLabelError("labels must be nonnegative integers when no class list is given")
        labels = raw_labels.astype(np.int64)
        n_classes = int(labels.max()) + 1

    if normalization == "minmax":
        features = apply_minmax(features, stats if stats is not None else minmax_stats(features))
    return RawDataset(features, labels, n_classes)


def binarize(d, threshold=0.5):
    return RawDataset((d.features > threshold).astype(np.float64), d.labels, d.n_classes)


def _ceil(v):
    # 0.2 * 70 == 14.000000000000002 must still count as 14
    return math.ceil(round(v, 9))


def _floor(v):
    return math.floor(round(v, 9))


def _class_indices(labels, n_classes):
    return [np.flatnonzero(labels == k) for k in range(n_classes)]


def stratified_subsample(d, fraction, rng):
    """Keep ``ceil(fraction * n_class)`` examples of every class, without replacement.

    Each class's index list (ascending) is shuffled by its own sub-stream; the
    union is returned in a shuffled order.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    chosen = []
    for k, idx in enumerate(_class_indices(d.labels, d.n_classes)):
        if idx.size == 0:
            raise ValueError(f"class {k} has no examples")
        take = _ceil(fraction * idx.size)
        chosen.append(idx[rng.child("class", k).permutation(idx.size)[:take]])
    chosen = np.concatenate(chosen)
    return d.take(chosen[rng.child("order").permutation(chosen.size)])


def _largest_remainder(total, ratios):
    raw = [total * r for r in ratios]
    base = [_floor(v) for v in raw]
    rest = total - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-round(raw[i] - base[i], 9), i))
    for i in order[:rest]:
        base[i] += 1
    return base


def split(d, ratios, rng):
    """Stratified train/valid/test split.

    Split sizes follow the largest-remainder rounding of ``n * ratio``. Each
    class contributes ``floor(n_class * ratio)`` to every split and its
    leftovers go to whichever split is furthest below its target size.
    """
    ratios = [float(r) for r in ratios]
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError("ratios must be three nonnegative numbers summing to 1")
    if ratios[0] == 0:
        raise ValueError("the training ratio must be positive")
    targets = _largest_remainder(len(d), ratios)
    per_class = []
    filled = [0, 0, 0]
    for k, idx in enumerate(_class_indices(d.labels, d.n_classes)):
        idx = idx[rng.child("class", k).permutation(idx.size)]
        counts = [_floor(idx.size * r) for r in ratios]
        per_class.append((idx, counts))
        filled = [f + c for f, c in zip(filled, counts)]
    for idx, counts in per_class:
        for _ in range(idx.size - sum(counts)):
            s = max(range(3), key=lambda i: (targets[i] - filled[i], -i))
            counts[s] += 1
            filled[s] += 1
    parts = [[], [], []]
    for idx, counts in per_class:
        pos = 0
        for s in range(3):
            parts[s].append(idx[pos : pos + counts[s]])
            pos += counts[s]
    out = []
    for s, name in enumerate(("train", "valid", "test")):
        sel = np.concatenate(parts[s]) if parts[s] else np.zeros(0, dtype=np.int64)
        out.append(d.take(sel[rng.child("order", name).permutation(sel.size)]))
    return tuple(out)
