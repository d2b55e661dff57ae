"""On-disk data model shared by extraction, graph building, training and eval.

Binary envelope
---------------
Every binary artifact is a sequence of one or more blocks.  A block is

    bytes 0..3    magic ``BNCL``
    byte  4       format version (currently 1)
    bytes 5..8    rows      (u32, little endian)
    bytes 9..12   cols      (u32, little endian)
    bytes 13..16  channels  (u32, little endian)
    bytes 17..    rows * cols * channels float32 values, IEEE-754 little
                  endian, C order (row, then column, then channel)

Feature files hold a single block of shape ``(n_samples, n_labels, 3)`` with
channel order entailment, neutral, contradiction.  Embedding files hold a
single block of shape ``(n_labels, dim, 1)``.  Ground-truth files hold a
single block of shape ``(n_samples, n_labels, 1)`` with 0/1 entries.
Checkpoints concatenate several blocks (see ``trainer.save_checkpoint``).

Manifest
--------
A JSON object tying a dataset together.  Keys: ``labels`` (ordered list of
label description strings; the list position is the label index), ``setting``
(one of the three supervision settings), ``kappa``, ``lambdas``,
``annotations`` (map from 0-based sample id, as a string, to a 0/1 vector of
length L), ``train_features``, ``test_features``, ``test_labels``,
``embeddings`` (file paths, resolved relative to the manifest's directory).
Which statistics keys must be present depends on the setting; see
``SupervisionConfig.validate``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

import numpy as np

MAGIC = b"BNCL"
VERSION = 1
FEATURE_CHANNELS = 3
ROW_SUM_TOL = 1e-5

SETTING_ANNOTATION_FREE = "annotation-free"
SETTING_SCARCE = "scarce-annotation"
SETTING_DOMAIN = "domain-supervisor"
SETTINGS = (SETTING_ANNOTATION_FREE, SETTING_SCARCE, SETTING_DOMAIN)

_HEADER = struct.Struct("<4sBIII")


class ValidationError(Exception):
    """A loaded or about-to-be-saved artifact violates the data model."""


# ---------------------------------------------------------------------------
# binary envelope


def write_block(fh: BinaryIO, array: np.ndarray) -> None:
    """Append one block to an open binary stream."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValidationError(f"block must be 2-d or 3-d, got shape {array.shape}")
    rows, cols, channels = arr.shape
    fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols, channels))
    fh.write(arr.tobytes(order="C"))


def read_block(fh: BinaryIO, source: str = "<stream>") -> np.ndarray | None:
    """Read the next block, or None at end of stream."""
    header = fh.read(_HEADER.size)
    if len(header) == 0:
        return None
    if len(header) < _HEADER.size:
        raise ValidationError(f"{source}: truncated block header")
    magic, version, rows, cols, channels = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ValidationError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValidationError(f"{source}: unsupported format version {version}")
    count = rows * cols * channels
    payload = fh.read(4 * count)
    if len(payload) < 4 * count:
        raise ValidationError(f"{source}: truncated payload, expected {4 * count} bytes")
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols, channels)
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def write_blocks(path: str | Path, arrays: Sequence[np.ndarray]) -> None:
    with open(path, "wb") as fh:
        for arr in arrays:
            write_block(fh, arr)


def read_blocks(path: str | Path) -> list[np.ndarray]:
    blocks = []
    with open(path, "rb") as fh:
        while True:
            block = read_block(fh, source=str(path))
            if block is None:
                break
            blocks.append(block)
    return blocks


def _read_single_block(path: str | Path) -> np.ndarray:
    blocks = read_blocks(path)
    if len(blocks) != 1:
        raise ValidationError(f"{path}: expected exactly one block, found {len(blocks)}")
    return blocks[0]


def peek_header(path: str | Path) -> tuple[int, int, int]:
    """Return (rows, cols, channels) of the first block without loading it."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise ValidationError(f"{path}: truncated block header")
    magic, version, rows, cols, channels = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported format version {version}")
    return rows, cols, channels


# ---------------------------------------------------------------------------
# typed containers


@dataclass(frozen=True)
class LabelSpace:
    """Ordered label descriptions; a label's index is its list position."""

    descriptions: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.descriptions)

    def validate(self) -> None:
        if not self.descriptions:
            raise ValidationError("label space is empty")
        for idx, text in enumerate(self.descriptions):
            if not isinstance(text, str) or not text.strip():
                raise ValidationError(f"label {idx} has an empty description")


@dataclass(frozen=True)
class FeatureMatrix:
    """Per sample and label the (entailment, neutral, contradiction) triple."""

    data: np.ndarray  # (n_samples, n_labels, 3) float32

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_labels(self) -> int:
        return self.data.shape[1]

    @property
    def entailment(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def neutral(self) -> np.ndarray:
        return self.data[:, :, 1]

    @property
    def contradiction(self) -> np.ndarray:
        return self.data[:, :, 2]

    def validate(self) -> None:
        if self.data.ndim != 3 or self.data.shape[2] != FEATURE_CHANNELS:
            raise ValidationError(
                f"feature matrix must have shape (N, L, {FEATURE_CHANNELS}), got {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("feature matrix contains non-finite entries")
        if np.any(self.data < 0.0):
            i = int(np.argwhere(np.any(self.data < 0.0, axis=(1, 2)))[0][0])
            raise ValidationError(f"feature matrix has a negative entry at sample {i}")
        sums = self.data.sum(axis=2, dtype=np.float64)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            i, l = map(int, np.argwhere(bad)[0])
            raise ValidationError(
                f"feature row does not sum to 1 within {ROW_SUM_TOL:g} "
                f"at sample {i}, label {l} (sum={sums[i, l]:.7f})"
            )


@dataclass(frozen=True)
class LabelEmbeddings:
    """One embedding vector per label, aligned with the label space order."""

    vectors: np.ndarray  # (n_labels, dim) float32

    @property
    def n_labels(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def validate(self) -> None:
        if self.vectors.ndim != 2:
            raise ValidationError(f"embeddings must be 2-d, got shape {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValidationError("embeddings contain non-finite entries")
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            idx = int(np.argwhere(norms == 0.0)[0][0])
            raise ValidationError(f"label {idx} has an all-zero embedding")


@dataclass(frozen=True)
class GroundTruth:
    """Dense binary label matrix; row i is the label set of sample id i."""

    labels: np.ndarray  # (n_samples, n_labels) uint8

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def n_labels(self) -> int:
        return self.labels.shape[1]

    def validate(self) -> None:
        if self.labels.ndim != 2:
            raise ValidationError(f"ground truth must be 2-d, got shape {self.labels.shape}")
        values = np.unique(self.labels)
        if not np.all(np.isin(values, (0, 1))):
            raise ValidationError("ground truth entries must be 0 or 1")
        empty = np.flatnonzero(self.labels.sum(axis=1) == 0)
        if empty.size:
            raise ValidationError(f"ground truth row {int(empty[0])} has no positive label")


@dataclass
class SupervisionConfig:
    """Supervision setting plus whichever statistics the setting provides.

    ``annotations`` maps 0-based train sample ids to 0/1 vectors of length L.
    """

    setting: str
    kappa: float | None = None
    lambdas: np.ndarray | None = None
    annotations: dict[int, np.ndarray] = field(default_factory=dict)

    def validate(self, n_labels: int, n_train: int | None = None) -> None:
        if self.setting not in SETTINGS:
            raise ValidationError(
                f"unknown setting {self.setting!r}, expected one of {', '.join(SETTINGS)}"
            )
        if self.kappa is not None:
            if not np.isfinite(self.kappa) or self.kappa <= 0:
                raise ValidationError(f"kappa must be positive, got {self.kappa}")
        if self.lambdas is not None:
            lam = np.asarray(self.lambdas, dtype=np.float64)
            if lam.shape != (n_labels,):
                raise ValidationError(
                    f"lambdas must have length {n_labels}, got shape {lam.shape}"
                )
            if np.any(~np.isfinite(lam)) or np.any(lam < 0.0) or np.any(lam > 1.0):
                raise ValidationError("lambdas must lie in [0, 1]")
        for sample_id, vec in self.annotations.items():
            arr = np.asarray(vec)
            if arr.shape != (n_labels,):
                raise ValidationError(
                    f"annotation for sample {sample_id} must have length {n_labels}"
                )
            if not np.all(np.isin(arr, (0, 1))):
                raise ValidationError(f"annotation for sample {sample_id} is not binary")
            if arr.sum() == 0:
                raise ValidationError(f"annotation for sample {sample_id} has no positive label")
            if sample_id < 0 or (n_train is not None and sample_id >= n_train):
                raise ValidationError(f"annotation sample id {sample_id} is out of range")
        if self.setting == SETTING_ANNOTATION_FREE:
            if self.annotations:
                raise ValidationError("annotation-free setting must not carry annotations")
            if self.kappa is None:
                raise ValidationError("kappa required for the annotation-free setting")
            if self.lambdas is None:
                raise ValidationError("lambdas required for the annotation-free setting")
        elif self.setting == SETTING_SCARCE:
            if not self.annotations:
                raise ValidationError("scarce-annotation setting requires annotations")
        else:  # domain-supervisor
            if self.kappa is None or self.lambdas is None:
                raise ValidationError("kappa and lambdas required for the domain-supervisor setting")
            if not self.annotations:
                raise ValidationError("domain-supervisor setting requires annotations")


@dataclass
class Manifest:
    """A loaded dataset manifest with resolved file paths."""

    label_space: LabelSpace
    supervision: SupervisionConfig
    train_features: Path
    test_features: Path | None = None
    test_labels: Path | None = None
    embeddings: Path | None = None


# ---------------------------------------------------------------------------
# savers / loaders


def save_features(matrix: FeatureMatrix, path: str | Path) -> None:
    matrix.validate()
    write_blocks(path, [matrix.data])


def load_features(path: str | Path) -> FeatureMatrix:
    block = _read_single_block(path)
    if block.shape[2] != FEATURE_CHANNELS:
        raise ValidationError(
            f"{path}: feature file must have {FEATURE_CHANNELS} channels, got {block.shape[2]}"
        )
    matrix = FeatureMatrix(data=block)
    matrix.validate()
    return matrix


def save_embeddings(embeddings: LabelEmbeddings, path: str | Path) -> None:
    embeddings.validate()
    write_blocks(path, [embeddings.vectors[:, :, None]])


def load_embeddings(path: str | Path) -> LabelEmbeddings:
    block = _read_single_block(path)
    if block.shape[2] != 1:
        raise ValidationError(f"{path}: embedding file must have 1 channel, got {block.shape[2]}")
    emb = LabelEmbeddings(vectors=block[:, :, 0])
    emb.validate()
    return emb


def save_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    truth.validate()
    write_blocks(path, [truth.labels.astype(np.float32)[:, :, None]])


def load_ground_truth(path: str | Path) -> GroundTruth:
    block = _read_single_block(path)
    if block.shape[2] != 1:
        raise ValidationError(f"{path}: label file must have 1 channel, got {block.shape[2]}")
    plane = block[:, :, 0]
    if not np.all(np.isin(plane, (0.0, 1.0))):
        raise ValidationError(f"{path}: ground truth entries must be 0 or 1")
    truth = GroundTruth(labels=plane.astype(np.uint8))
    truth.validate()
    return truth


def load_manifest(path: str | Path) -> Manifest:
    """Load and validate a manifest, cross-checking the referenced files."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    for key in ("labels", "setting", "train_features"):
        if key not in raw:
            raise ValidationError(f"{path}: missing manifest field {key!r}")

    label_space = LabelSpace(descriptions=tuple(raw["labels"]))
    label_space.validate()
    n_labels = label_space.count

    annotations = {}
    for key, vec in (raw.get("annotations") or {}).items():
        try:
            sample_id = int(key)
        except (TypeError, ValueError):
            raise ValidationError(f"{path}: annotation key {key!r} is not an integer sample id")
        annotations[sample_id] = np.asarray(vec, dtype=np.uint8)

    lambdas = raw.get("lambdas")
    supervision = SupervisionConfig(
        setting=raw["setting"],
        kappa=None if raw.get("kappa") is None else float(raw["kappa"]),
        lambdas=None if lambdas is None else np.asarray(lambdas, dtype=np.float64),
        annotations=annotations,
    )

    base = path.parent

    def resolve(key: str, required: bool = False) -> Path | None:
        value = raw.get(key)
        if value is None:
            if required:
                raise ValidationError(f"{path}: missing manifest field {key!r}")
            return None
        return base / value

    manifest = Manifest(
        label_space=label_space,
        supervision=supervision,
        train_features=resolve("train_features", required=True),
        test_features=resolve("test_features"),
        test_labels=resolve("test_labels"),
        embeddings=resolve("embeddings"),
    )

    rows, cols, channels = peek_header(manifest.train_features)
    if cols != n_labels:
        raise ValidationError(
            f"{manifest.train_features}: {cols} labels in train features, manifest lists {n_labels}"
        )
    if channels != FEATURE_CHANNELS:
        raise ValidationError(f"{manifest.train_features}: expected {FEATURE_CHANNELS} channels")
    n_train = rows
    if manifest.test_features is not None:
        _, cols, channels = peek_header(manifest.test_features)
        if cols != n_labels or channels != FEATURE_CHANNELS:
            raise ValidationError(f"{manifest.test_features}: dimensions disagree with manifest")
    if manifest.test_labels is not None:
        _, cols, _ = peek_header(manifest.test_labels)
        if cols != n_labels:
            raise ValidationError(f"{manifest.test_labels}: dimensions disagree with manifest")
    if manifest.embeddings is not None:
        rows, _, _ = peek_header(manifest.embeddings)
        if rows != n_labels:
            raise ValidationError(f"{manifest.embeddings}: {rows} rows for {n_labels} labels")

    supervision.validate(n_labels, n_train=n_train)
    return manifest


def save_manifest(
    path: str | Path,
    label_space: LabelSpace,
    supervision: SupervisionConfig,
    files: Mapping[str, str],
) -> None:
    """Write a manifest JSON.  ``files`` holds manifest-relative path strings."""
    payload: dict = {
        "labels": list(label_space.descriptions),
        "setting": supervision.setting,
    }
    if supervision.kappa is not None:
        payload["kappa"] = float(supervision.kappa)
    if supervision.lambdas is not None:
        payload["lambdas"] = [float(v) for v in supervision.lambdas]
    if supervision.annotations:
        payload["annotations"] = {
            str(k): [int(b) for b in supervision.annotations[k]]
            for k in sorted(supervision.annotations)
        }
    for key in ("train_features", "test_features", "test_labels", "embeddings"):
        if key in files:
            payload[key] = files[key]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
