"""Writer side of the on-disk contract shared with the training package.

The two packages exchange data only through these files, so the format is
implemented here independently rather than imported.  A binary artifact is a
sequence of blocks:

    bytes 0..3    magic ``BNCL``
    byte  4       format version (currently 1)
    bytes 5..8    rows      (u32, little endian)
    bytes 9..12   cols      (u32, little endian)
    bytes 13..16  channels  (u32, little endian)
    bytes 17..    rows * cols * channels float32 values, IEEE-754 little
                  endian, C order (row, then column, then channel)

Feature files hold one block of shape ``(n_samples, n_labels, 3)`` with
channel order entailment, neutral, contradiction.  Embedding files hold one
block of shape ``(n_labels, dim, 1)``, ground-truth files one block of shape
``(n_samples, n_labels, 1)`` with 0/1 entries.  The manifest is a JSON object
listing label descriptions, the supervision setting with its statistics, and
the file paths relative to the manifest's own directory.

Every writer validates before touching the disk, so a file that exists is a
file the consumer will accept.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

import numpy as np

from .config import SETTINGS, ExtractionError

MAGIC = b"BNCL"
VERSION = 1
FEATURE_CHANNELS = 3
ROW_SUM_TOL = 1e-5

_HEADER = struct.Struct("<4sBIII")


def write_block(fh: BinaryIO, array: np.ndarray) -> None:
    """Append one block to an open binary stream."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ExtractionError(f"block must be 2-d or 3-d, got shape {array.shape}")
    rows, cols, channels = arr.shape
    fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols, channels))
    fh.write(arr.tobytes(order="C"))


def read_block(fh: BinaryIO, source: str = "<stream>") -> np.ndarray | None:
    """Read the next block, or None at end of stream."""
    header = fh.read(_HEADER.size)
    if len(header) == 0:
        return None
    if len(header) < _HEADER.size:
        raise ExtractionError(f"{source}: truncated block header")
    magic, version, rows, cols, channels = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ExtractionError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ExtractionError(f"{source}: unsupported format version {version}")
    count = rows * cols * channels
    payload = fh.read(4 * count)
    if len(payload) < 4 * count:
        raise ExtractionError(f"{source}: truncated payload, expected {4 * count} bytes")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols, channels)


def read_single_block(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        block = read_block(fh, source=str(path))
        if block is None:
            raise ExtractionError(f"{path}: file holds no block")
        if read_block(fh, source=str(path)) is not None:
            raise ExtractionError(f"{path}: expected exactly one block")
    return block


def validate_features(data: np.ndarray) -> None:
    if data.ndim != 3 or data.shape[2] != FEATURE_CHANNELS:
        raise ExtractionError(
            f"feature array must have shape (N, L, {FEATURE_CHANNELS}), got {data.shape}"
        )
    if not np.all(np.isfinite(data)):
        raise ExtractionError("feature array contains non-finite entries")
    if np.any(data < 0.0):
        i = int(np.argwhere(np.any(data < 0.0, axis=(1, 2)))[0][0])
        raise ExtractionError(f"feature array has a negative entry at sample {i}")
    sums = data.sum(axis=2, dtype=np.float64)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        i, l = map(int, np.argwhere(bad)[0])
        raise ExtractionError(
            f"feature row does not sum to 1 within {ROW_SUM_TOL:g} "
            f"at sample {i}, label {l} (sum={sums[i, l]:.7f})"
        )


def write_features(data: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(data, dtype=np.float32)
    validate_features(arr)
    with open(path, "wb") as fh:
        write_block(fh, arr)


def write_embeddings(vectors: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(vectors, dtype=np.float32)
    if arr.ndim != 2:
        raise ExtractionError(f"embeddings must be 2-d, got shape {vectors.shape}")
    if not np.all(np.isfinite(arr)):
        raise ExtractionError("embeddings contain non-finite entries")
    norms = np.linalg.norm(arr.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        idx = int(np.argwhere(norms == 0.0)[0][0])
        raise ExtractionError(f"label {idx} has an all-zero embedding")
    with open(path, "wb") as fh:
        write_block(fh, arr[:, :, None])


def write_ground_truth(labels: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ExtractionError(f"ground truth must be 2-d, got shape {arr.shape}")
    if not np.all(np.isin(arr, (0, 1))):
        raise ExtractionError("ground truth entries must be 0 or 1")
    empty = np.flatnonzero(arr.sum(axis=1) == 0)
    if empty.size:
        raise ExtractionError(f"ground truth row {int(empty[0])} has no positive label")
    with open(path, "wb") as fh:
        write_block(fh, arr.astype(np.float32)[:, :, None])


def write_manifest(
    path: str | Path,
    labels: Sequence[str],
    setting: str,
    files: Mapping[str, str],
    kappa: float | None = None,
    lambdas: np.ndarray | None = None,
    annotations: Mapping[int, np.ndarray] | None = None,
) -> None:
    """Write a manifest JSON; ``files`` holds manifest-relative path strings."""
    if setting not in SETTINGS:
        raise ExtractionError(f"unknown setting {setting!r}")
    if "train_features" not in files:
        raise ExtractionError("manifest requires a train_features path")
    payload: dict = {"labels": list(labels), "setting": setting}
    if kappa is not None:
        payload["kappa"] = float(kappa)
    if lambdas is not None:
        payload["lambdas"] = [float(v) for v in lambdas]
    if annotations:
        payload["annotations"] = {
            str(k): [int(b) for b in annotations[k]] for k in sorted(annotations)
        }
    for key in ("train_features", "test_features", "test_labels", "embeddings"):
        if key in files:
            payload[key] = files[key]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
