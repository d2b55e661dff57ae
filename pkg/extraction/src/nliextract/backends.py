"""NLI backends and the class-order mapping between model and file format.

A backend scores (premise, hypothesis) pairs and reports its own class order
through ``id2label`` metadata.  The interchange format fixes the channel
order as entailment, neutral, contradiction, but models are free to order
their output however they like (BART MNLI checkpoints put contradiction
first), so the extraction loop always permutes through ``channel_order``
instead of trusting positions.  Hardcoding that permutation is the classic
silent-corruption bug in NLI pipelines; reading it from metadata makes a
mismatch loud.
"""

from __future__ import annotations

import re
from hashlib import blake2b
from typing import Mapping, Protocol, Sequence

import numpy as np

from .config import DEFAULT_MODEL, ExtractionError

CLASS_NAMES = ("entailment", "neutral", "contradiction")

_WORD = re.compile(r"[0-9a-z]+")


def simple_tokenize(text: str) -> list[str]:
    """Lowercase word tokenizer: maximal alphanumeric runs."""
    return _WORD.findall(text.lower())


def channel_order(id2label: Mapping[int, str]) -> tuple[int, int, int]:
    """Index of the entailment, neutral and contradiction class, in that order.

    Matching is case-insensitive and ignores surrounding whitespace.  Raises
    when a class is missing or named twice, because guessing here corrupts
    every feature row downstream.
    """
    found: dict[str, int] = {}
    for idx, name in id2label.items():
        key = str(name).strip().lower()
        if key in CLASS_NAMES:
            if key in found:
                raise ExtractionError(f"model metadata names the class {key!r} twice")
            found[key] = int(idx)
    missing = [name for name in CLASS_NAMES if name not in found]
    if missing:
        raise ExtractionError(
            f"model metadata is missing the class(es) {', '.join(missing)}; got {dict(id2label)!r}"
        )
    return (found["entailment"], found["neutral"], found["contradiction"])


class NLIBackend(Protocol):
    identifier: str
    id2label: Mapping[int, str]

    def tokenize(self, text: str) -> list[str]: ...

    def predict(self, pairs: Sequence[tuple[str, str]], max_length: int) -> np.ndarray: ...


class StubNLIBackend:
    """Deterministic model-free backend for tests and offline runs.

    Scores come from a keyed hash of the truncated premise tokens and the
    hypothesis tokens, nudged so that token overlap between the two raises
    entailment and lowers contradiction.  The class order deliberately
    mirrors MNLI checkpoints (contradiction first) so the metadata mapping
    is exercised on every run.  Output depends only on the first
    ``max_length`` premise tokens, matching how a real tokenizer truncates.
    """

    identifier = "stub"
    id2label = {0: "contradiction", 1: "neutral", 2: "entailment"}

    def tokenize(self, text: str) -> list[str]:
        return simple_tokenize(text)

    def _score(self, premise: str, hypothesis: str, max_length: int) -> dict[str, float]:
        premise_tokens = simple_tokenize(premise)[:max_length]
        hypothesis_tokens = simple_tokenize(hypothesis)
        payload = "\x1f".join(premise_tokens) + "\x1e" + "\x1f".join(hypothesis_tokens)
        digest = blake2b(payload.encode("utf-8"), digest_size=24).digest()
        base = np.frombuffer(digest, dtype="<u8").astype(np.float64) / 2.0**64
        hypothesis_vocab = set(hypothesis_tokens)
        overlap = len(hypothesis_vocab & set(premise_tokens)) / max(1, len(hypothesis_vocab))
        return {
            "entailment": 2.0 * (base[0] - 0.5) + 3.0 * overlap,
            "neutral": 2.0 * (base[1] - 0.5),
            "contradiction": 2.0 * (base[2] - 0.5) - 3.0 * overlap,
        }

    def predict(self, pairs: Sequence[tuple[str, str]], max_length: int) -> np.ndarray:
        out = np.empty((len(pairs), 3), dtype=np.float64)
        for row, (premise, hypothesis) in enumerate(pairs):
            named = self._score(premise, hypothesis, max_length)
            logits = np.array([named[self.id2label[i]] for i in range(3)])
            shifted = np.exp(logits - logits.max())
            out[row] = shifted / shifted.sum()
        return out


class TransformersNLIBackend:
    """Hugging Face sequence-classification backend.

    ``truncation="only_first"`` keeps the hypothesis intact and truncates
    the premise once the pair exceeds ``max_length`` tokens.  Inference runs
    in eval mode under ``no_grad``; softmax is taken in float64 so rows land
    on the simplex as tightly as the file format demands.
    """

    def __init__(self, identifier: str = DEFAULT_MODEL, tokenizer=None, model=None):
        if tokenizer is None or model is None:
            try:
                from transformers import AutoModelForSequenceClassification, AutoTokenizer
            except ImportError as exc:
                raise ExtractionError(
                    f"model {identifier!r} needs the transformers and torch packages "
                    "(install the nli extra)"
                ) from exc
            tokenizer = AutoTokenizer.from_pretrained(identifier)
            model = AutoModelForSequenceClassification.from_pretrained(identifier)
        model.eval()
        self._tokenizer = tokenizer
        self._model = model
        self.identifier = identifier
        raw = getattr(model.config, "id2label", None) or {}
        self.id2label = {int(k): str(v) for k, v in raw.items()}

    def tokenize(self, text: str) -> list[str]:
        return self._tokenizer.tokenize(text)

    def predict(self, pairs: Sequence[tuple[str, str]], max_length: int) -> np.ndarray:
        import torch

        premises = [premise for premise, _ in pairs]
        hypotheses = [hypothesis for _, hypothesis in pairs]
        encoded = self._tokenizer(
            premises,
            hypotheses,
            truncation="only_first",
            max_length=max_length,
            padding=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            logits = self._model(**encoded).logits
        return torch.softmax(logits.to(torch.float64), dim=1).cpu().numpy()


def resolve_backend(identifier: str) -> NLIBackend:
    if identifier == "stub":
        return StubNLIBackend()
    return TransformersNLIBackend(identifier)
