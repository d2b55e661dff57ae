"""Word-vector lookup and label embedding averaging.

The embedding source is a plain text table, one token per line followed by
its vector components separated by single spaces (the format GloVe ships
in), optionally gzip-compressed.  Tables are streamed so only the tokens
actually needed for the label descriptions are kept in memory.
"""

from __future__ import annotations

import gzip
import logging
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backends import simple_tokenize
from .config import ExtractionError

logger = logging.getLogger(__name__)


def label_vocabulary(descriptions: Iterable[str]) -> set[str]:
    """All tokens appearing in any label description."""
    vocab: set[str] = set()
    for description in descriptions:
        vocab.update(simple_tokenize(description))
    return vocab


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def read_word_vectors(
    path: str | Path, vocabulary: set[str] | None = None
) -> dict[str, np.ndarray]:
    """Read a word-vector table, keeping only ``vocabulary`` when given.

    The dimension is taken from the first line.  Later lines whose trailing
    fields do not parse as that many floats are rejected with their line
    number; a token containing spaces (a handful exist in the large GloVe
    releases) is reassembled from the leading fields instead of corrupting
    the vector.  The first occurrence of a token wins.
    """
    path = Path(path)
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise ExtractionError(f"{path}:{lineno}: not a token-vector line")
            if dim is None:
                dim = len(parts) - 1
            if len(parts) < dim + 1:
                raise ExtractionError(
                    f"{path}:{lineno}: expected {dim} vector components, got {len(parts) - 1}"
                )
            token = " ".join(parts[: len(parts) - dim])
            if vocabulary is not None and token not in vocabulary:
                continue
            if token in table:
                continue
            try:
                vector = np.array(parts[len(parts) - dim :], dtype=np.float32)
            except ValueError:
                raise ExtractionError(f"{path}:{lineno}: non-numeric vector component")
            table[token] = vector
    if dim is None:
        raise ExtractionError(f"{path}: empty word-vector file")
    return table


def average_label_embeddings(
    descriptions: Sequence[str], table: Mapping[str, np.ndarray]
) -> np.ndarray:
    """One vector per label: the mean of its in-vocabulary token vectors.

    Tokens missing from the table are skipped; a label whose tokens are all
    missing cannot get an embedding, so every such label is collected and
    reported in one error.
    """
    if not descriptions:
        raise ExtractionError("no label descriptions to embed")
    dim = len(next(iter(table.values()))) if table else 0
    vectors = np.zeros((len(descriptions), dim), dtype=np.float32)
    unresolved = []
    skipped = 0
    for idx, description in enumerate(descriptions):
        tokens = simple_tokenize(description)
        known = [table[token] for token in tokens if token in table]
        skipped += len(tokens) - len(known)
        if not known:
            unresolved.append(f"{description!r} (index {idx})")
            continue
        vectors[idx] = np.mean(np.stack(known).astype(np.float64), axis=0).astype(np.float32)
    if unresolved:
        raise ExtractionError(
            "no word vectors for label(s): " + ", ".join(unresolved)
        )
    if skipped:
        logger.info("skipped %d out-of-vocabulary label tokens", skipped)
    return vectors
