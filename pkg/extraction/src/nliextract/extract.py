"""Feature and embedding extraction plus the dataset-level driver.

``extract_features`` queries the NLI backend with every (premise,
hypothesis) pair, batched for throughput, and assembles one
``(n_samples, n_labels, 3)`` array in sample order before a single
single-threaded write.  Channel order in the file is always entailment,
neutral, contradiction regardless of the backend's own class order.

``run_extraction`` is what the command line calls: it extracts train and
test features, ground truth and optionally label embeddings for a corpus,
computes the supervision statistics the chosen setting is allowed to see,
and writes the manifest binding everything together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import interchange
from .backends import NLIBackend, channel_order, resolve_backend
from .config import (
    SETTING_ANNOTATION_FREE,
    SETTING_DOMAIN,
    SETTING_SCARCE,
    ExtractionConfig,
    ExtractionError,
)
from .corpus import Corpus, select_annotations, train_statistics
from .embeddings import average_label_embeddings, label_vocabulary, read_word_vectors
from .hypotheses import build_hypotheses

logger = logging.getLogger(__name__)

MANIFEST_BASENAMES = {
    SETTING_ANNOTATION_FREE: "manifest_annotation_free.json",
    SETTING_SCARCE: "manifest_scarce_annotation.json",
    SETTING_DOMAIN: "manifest_domain_supervisor.json",
}


@dataclass(frozen=True)
class ExtractionReport:
    """What one feature extraction produced."""

    path: Path
    n_samples: int
    n_labels: int
    truncated: int


def extract_features(
    texts: Sequence[str],
    hypotheses: Sequence[str],
    config: ExtractionConfig,
    out_path: str | Path,
    backend: NLIBackend | None = None,
) -> ExtractionReport:
    """Score every premise against every hypothesis and write one block.

    Premises longer than ``config.max_length`` backend tokens are truncated
    silently by the backend; only their count is logged.  The output array
    is filled in sample-major order, so the file layout is independent of
    the batch size.
    """
    config.validate()
    if not texts:
        raise ExtractionError("no texts to extract features from")
    if not hypotheses:
        raise ExtractionError("no hypotheses to score against")
    if backend is None:
        backend = resolve_backend(config.model)
    order = channel_order(backend.id2label)

    truncated = sum(1 for text in texts if len(backend.tokenize(text)) > config.max_length)
    if truncated:
        logger.info(
            "truncated %d of %d premises beyond %d tokens", truncated, len(texts), config.max_length
        )

    n_samples = len(texts)
    n_labels = len(hypotheses)
    data = np.zeros((n_samples, n_labels, 3), dtype=np.float32)
    pairs = [(i, l) for i in range(n_samples) for l in range(n_labels)]
    for start in range(0, len(pairs), config.batch_size):
        batch = pairs[start : start + config.batch_size]
        queries = [(texts[i], hypotheses[l]) for i, l in batch]
        probs = np.asarray(backend.predict(queries, config.max_length), dtype=np.float64)
        if probs.shape != (len(batch), 3):
            raise ExtractionError(
                f"backend returned shape {probs.shape}, expected {(len(batch), 3)}"
            )
        for row, (i, l) in enumerate(batch):
            data[i, l, :] = probs[row, order]

    out_path = Path(out_path)
    interchange.write_features(data, out_path)
    return ExtractionReport(
        path=out_path, n_samples=n_samples, n_labels=n_labels, truncated=truncated
    )


def extract_label_embeddings(
    descriptions: Sequence[str], config: ExtractionConfig, out_path: str | Path
) -> np.ndarray:
    """Average word vectors per label description and write one block."""
    if config.embedding_source is None:
        raise ExtractionError("no embedding source configured")
    table = read_word_vectors(config.embedding_source, vocabulary=label_vocabulary(descriptions))
    vectors = average_label_embeddings(descriptions, table)
    interchange.write_embeddings(vectors, out_path)
    return vectors


def _supervision_fields(corpus: Corpus, config: ExtractionConfig):
    """Statistics the manifest may expose under the configured setting.

    Annotation-free and domain-supervisor manifests carry the population
    statistics computed from the training split's gold labels; the scarce
    and domain manifests carry a seeded annotated subset of one sample per
    label.  Scarce deliberately omits the population statistics so the
    consumer has to estimate them from the annotations.
    """
    kappa: float | None = None
    lambdas: np.ndarray | None = None
    annotations: dict[int, np.ndarray] | None = None
    if config.setting in (SETTING_ANNOTATION_FREE, SETTING_DOMAIN):
        kappa, lambdas = train_statistics(corpus)
    if config.setting in (SETTING_SCARCE, SETTING_DOMAIN):
        annotations = select_annotations(corpus, seed=config.seed)
    return kappa, lambdas, annotations


def run_extraction(
    corpus: Corpus,
    config: ExtractionConfig,
    out_dir: str | Path,
    manifest_name: str | None = None,
) -> dict[str, Path]:
    """Extract a full dataset into ``out_dir`` and return the written paths."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    backend = resolve_backend(config.model)
    hypotheses = build_hypotheses(corpus.descriptions, config.template)

    files = {"train_features": "train_features.bin"}
    paths: dict[str, Path] = {}
    report = extract_features(
        [sample.text for sample in corpus.train],
        hypotheses,
        config,
        out / files["train_features"],
        backend=backend,
    )
    paths["train_features"] = report.path
    truncated = report.truncated

    if corpus.test:
        files["test_features"] = "test_features.bin"
        files["test_labels"] = "test_labels.bin"
        report = extract_features(
            [sample.text for sample in corpus.test],
            hypotheses,
            config,
            out / files["test_features"],
            backend=backend,
        )
        paths["test_features"] = report.path
        truncated += report.truncated
        interchange.write_ground_truth(corpus.label_matrix("test"), out / files["test_labels"])
        paths["test_labels"] = out / files["test_labels"]

    if config.embedding_source is not None:
        files["embeddings"] = "embeddings.bin"
        extract_label_embeddings(corpus.descriptions, config, out / files["embeddings"])
        paths["embeddings"] = out / files["embeddings"]

    kappa, lambdas, annotations = _supervision_fields(corpus, config)
    basename = manifest_name or MANIFEST_BASENAMES[config.setting]
    manifest_path = out / basename
    interchange.write_manifest(
        manifest_path,
        labels=corpus.descriptions,
        setting=config.setting,
        files=files,
        kappa=kappa,
        lambdas=lambdas,
        annotations=annotations,
    )
    paths["manifest"] = manifest_path
    if truncated:
        logger.info("%d premises were truncated in total", truncated)
    return paths
