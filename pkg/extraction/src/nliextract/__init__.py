"""Extraction of NLI features and label embeddings from raw text corpora.

This package turns a multi-label text corpus into the binary interchange
files consumed by the downstream training package: per sample and label the
(entailment, neutral, contradiction) probability triple from a pre-trained
NLI model, plus one averaged word-embedding vector per label description.
The two packages share nothing but the on-disk formats.
"""

from .config import DEFAULT_MODEL, DEFAULT_TEMPLATE, ExtractionConfig, ExtractionError
from .hypotheses import build_hypotheses

__all__ = [
    "DEFAULT_MODEL",
    "DEFAULT_TEMPLATE",
    "ExtractionConfig",
    "ExtractionError",
    "build_hypotheses",
]
