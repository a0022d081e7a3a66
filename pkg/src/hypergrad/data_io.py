"""Dataset ingestion (IDX and CSV), label corruption, and result writers.

IDX here means the classic big-endian binary format used for image/label
archives: magic 0x00000801 for 1-D unsigned-byte label files and
0x00000803 for 3-D unsigned-byte image stacks. Images are flattened to
rows and scaled to [0, 1]; labels stay integers.

Run artifacts are deliberately plain: JSON-lines for records, CSV for
curves, so anything can consume them.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .errors import IngestError
from .numerics import make_rng

_IDX_LABEL_MAGIC = 0x00000801
_IDX_IMAGE_MAGIC = 0x00000803


def read_idx(path):
    """Parse one IDX file into a uint8 array (1-D labels or 3-D images)."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IngestError(f"{path}: too short for an IDX header ({len(raw)} bytes)")
    magic = int.from_bytes(raw[:4], "big")
    if magic == _IDX_LABEL_MAGIC:
        ndim = 1
    elif magic == _IDX_IMAGE_MAGIC:
        ndim = 3
    else:
        raise IngestError(
            f"{path}: bad IDX magic 0x{magic:08X} "
            f"(expected 0x{_IDX_LABEL_MAGIC:08X} or 0x{_IDX_IMAGE_MAGIC:08X})"
        )
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IngestError(f"{path}: truncated IDX dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = int(np.prod(dims))
    payload = raw[header:]
    if len(payload) != expected:
        raise IngestError(
            f"{path}: truncated IDX payload: expected {expected} bytes "
            f"for dims {dims}, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def write_idx(path, array):
    """Inverse of read_idx; accepts 1-D (labels) or 3-D (images) uint8 data."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if array.ndim == 1:
        magic = _IDX_LABEL_MAGIC
    elif array.ndim == 3:
        magic = _IDX_IMAGE_MAGIC
    else:
        raise ValueError(f"IDX supports 1-D or 3-D data, got shape {array.shape}")
    with open(path, "wb") as fh:
        fh.write(magic.to_bytes(4, "big"))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def ingest_idx(images_path, labels_path=None, split="train"):
    """Build a Dataset from an IDX image stack plus optional label file."""
    images = read_idx(images_path)
    if images.ndim != 3:
        raise IngestError(f"{images_path}: expected an image stack, got labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = None
    n_classes = None
    if labels_path is not None:
        labels = read_idx(labels_path)
        if labels.ndim != 1:
            raise IngestError(f"{labels_path}: expected a label file, got images")
        if len(labels) != len(features):
            raise IngestError(
                f"label count {len(labels)} does not match image count "
                f"{len(features)}"
            )
        labels = labels.astype(np.int64)
        n_classes = int(labels.max()) + 1
    return Dataset(features=features, labels=labels, split=split,
                   n_classes=n_classes)


def _looks_numeric(token):
    try:
        float(token)
        return True
    except ValueError:
        return False


def ingest_csv(path, split="train"):
    """CSV with the label in the first column; a header row is optional."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and not all(_looks_numeric(c) for c in row):
                continue  # header
            if not all(_looks_numeric(c) for c in row):
                raise IngestError(f"{path}:{lineno}: non-numeric entry in {row!r}")
            rows.append([float(c) for c in row])
    if not rows:
        raise IngestError(f"{path}: no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise IngestError(
                f"{path}: ragged CSV: row {i} has {len(row)} fields, "
                f"expected {width}"
            )
    data = np.asarray(rows, dtype=np.float64)
    raw_labels = data[:, 0]
    features = data[:, 1:]
    if np.all(raw_labels == np.round(raw_labels)) and raw_labels.min() >= 0:
        labels = raw_labels.astype(np.int64)
        n_classes = int(labels.max()) + 1
        return Dataset(features=features, labels=labels, split=split,
                       n_classes=n_classes)
    return Dataset(features=features, labels=raw_labels.reshape(-1, 1),
                   split=split)


def ingest(path, fmt="auto", labels_path=None, split="train"):
    if fmt == "auto":
        fmt = "csv" if str(path).lower().endswith(".csv") else "idx"
    if fmt == "idx":
        return ingest_idx(path, labels_path=labels_path, split=split)
    if fmt == "csv":
        return ingest_csv(path, split=split)
    raise IngestError(f"unknown dataset format {fmt!r}")


def corrupt_labels(ds: Dataset, fraction, seed):
    """Relabel a random subset with uniformly random *different* classes.

    Returns the corrupted dataset and the sorted index array of examples
    whose labels were flipped (the ground truth for F1 scoring).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"corruption fraction {fraction} outside [0, 1]")
    k = int(ds.n_classes or 0)
    if k < 2:
        raise ValueError("label corruption needs at least 2 classes")
    n_corrupt = int(fraction * ds.n)
    if n_corrupt == 0:
        return ds, np.empty(0, dtype=np.int64)
    rng = make_rng(seed, 0xC0, 0)
    picked = np.sort(rng.choice(ds.n, size=n_corrupt, replace=False))
    labels = ds.labels.copy()
    # draw in [0, k-1) and skip over the original label to stay different
    draws = rng.integers(0, k - 1, size=n_corrupt)
    originals = labels[picked]
    draws = draws + (draws >= originals)
    labels[picked] = draws
    out = Dataset(features=ds.features, labels=labels, split=ds.split,
                  n_classes=ds.n_classes)
    return out, picked


# ---------------------------------------------------------------------------
# Result emission


def write_jsonl(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_curves_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
