"""Extraction configuration and the package-wide error type."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_MODEL = "facebook/bart-large-mnli"
DEFAULT_TEMPLATE = "This is about {}"
DEFAULT_MAX_LENGTH = 128

CORPUS_FORMATS = ("jsonl", "reuters", "stackexchange")

SETTING_ANNOTATION_FREE = "annotation-free"
SETTING_SCARCE = "scarce-annotation"
SETTING_DOMAIN = "domain-supervisor"
SETTINGS = (SETTING_ANNOTATION_FREE, SETTING_SCARCE, SETTING_DOMAIN)


class ExtractionError(Exception):
    """Bad configuration, corpus, embedding table, or model metadata."""


def validate_template(template: str) -> None:
    """Require exactly one positional ``{}`` placeholder and nothing else.

    The placeholder receives the label description verbatim.  Named or
    numbered fields are rejected so a typo cannot silently produce the same
    hypothesis for every label.
    """
    if template.count("{}") != 1:
        raise ExtractionError(
            f"hypothesis template must contain the placeholder {{}} exactly once, got {template!r}"
        )
    rest = template.replace("{}", "", 1)
    if "{" in rest or "}" in rest:
        raise ExtractionError(f"hypothesis template has stray braces: {template!r}")


@dataclass
class ExtractionConfig:
    """Everything one extraction run needs besides the corpus itself.

    ``model`` selects the NLI backend: the name ``stub`` gives a
    deterministic hash-based backend that needs no model download, any other
    value is treated as a Hugging Face model identifier.  ``embedding_source``
    points at a word-vector text file (one token plus its vector per line).
    ``include_title`` and ``train_fraction`` only matter for corpus formats
    that carry titles or lack a native train/test split.
    """

    corpus: str | None = None
    corpus_format: str = "jsonl"
    model: str = DEFAULT_MODEL
    embedding_source: str | None = None
    max_length: int = DEFAULT_MAX_LENGTH
    template: str = DEFAULT_TEMPLATE
    batch_size: int = 32
    include_title: bool = True
    train_fraction: float = 0.8
    setting: str = SETTING_ANNOTATION_FREE
    seed: int = 0

    def validate(self) -> None:
        validate_template(self.template)
        if self.corpus_format not in CORPUS_FORMATS:
            raise ExtractionError(
                f"unknown corpus format {self.corpus_format!r}, expected one of {', '.join(CORPUS_FORMATS)}"
            )
        if self.setting not in SETTINGS:
            raise ExtractionError(
                f"unknown setting {self.setting!r}, expected one of {', '.join(SETTINGS)}"
            )
        if self.max_length < 1:
            raise ExtractionError(f"max_length must be at least 1, got {self.max_length}")
        if self.batch_size < 1:
            raise ExtractionError(f"batch_size must be at least 1, got {self.batch_size}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ExtractionError(
                f"train_fraction must lie strictly between 0 and 1, got {self.train_fraction}"
            )
        if not self.model:
            raise ExtractionError("model identifier is empty")
