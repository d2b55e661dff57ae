"""Signed label-dependency graph and balance-theory neighbourhoods.

Labels are embedded by averaging the word vectors of their description
tokens.  Cosine similarity over those embeddings is thresholded at two
percentiles of its off-diagonal distribution: pairs at or above the high
threshold become positive (co-occurrence) edges, pairs at or below the low
threshold become negative (exclusion) edges.

Multi-hop neighbourhoods follow balance theory: walks with an even number of
negative edges connect allies, walks with an odd number connect opponents.
``balanced_neighborhoods`` carries signed walk counts to a given depth; the
k-hop positive neighbourhood of label v is every u with at least one
even-parity walk of length k from u to v (likewise odd parity for negative).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .interchange import LabelEmbeddings, LabelSpace, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_PERCENTILES = (10.0, 90.0)
# Candidate pairs worth sweeping when tuning on a new corpus.
PERCENTILE_CANDIDATES = ((5.0, 95.0), (10.0, 90.0), (30.0, 70.0))


class DegenerateThresholdError(Exception):
    """The similarity distribution cannot support the requested percentiles."""


def default_tokenizer(text: str) -> list[str]:
    return text.lower().split()


def embed_labels(
    label_space: LabelSpace,
    token_embeddings: Mapping[str, np.ndarray],
    tokenizer: Callable[[str], list[str]] = default_tokenizer,
) -> LabelEmbeddings:
    """Average the word vectors of each label description's tokens.

    Tokens without an embedding are skipped with a warning; a label whose
    tokens are all unknown is an error.
    """
    label_space.validate()
    rows = []
    for idx, text in enumerate(label_space.descriptions):
        tokens = tokenizer(text)
        known = [np.asarray(token_embeddings[t], dtype=np.float64) for t in tokens if t in token_embeddings]
        missing = [t for t in tokens if t not in token_embeddings]
        if missing:
            logger.warning(
                "label %d (%r): no embedding for token(s) %s; skipped",
                idx,
                text,
                ", ".join(repr(t) for t in missing),
            )
        if not known:
            raise ValidationError(f"label {idx} ({text!r}): no description token has an embedding")
        rows.append(np.mean(known, axis=0))
    emb = LabelEmbeddings(vectors=np.stack(rows).astype(np.float32))
    emb.validate()
    return emb


def similarity_matrix(embeddings: LabelEmbeddings) -> np.ndarray:
    """Pairwise cosine similarity, exactly symmetric, unit diagonal."""
    embeddings.validate()
    vectors = embeddings.vectors.astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    normed = vectors / norms[:, None]
    sim = normed @ normed.T
    upper = np.triu(sim, k=1)
    sim = upper + upper.T
    np.fill_diagonal(sim, 1.0)
    return np.clip(sim, -1.0, 1.0)


def nearest_rank_percentile(sorted_values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile of an ascending-sorted 1-d array."""
    m = sorted_values.shape[0]
    rank = max(1, math.ceil(pct / 100.0 * m))
    return float(sorted_values[min(rank, m) - 1])


@dataclass(frozen=True)
class SignedLabelGraph:
    """Thresholded similarity graph with disjoint positive/negative edges."""

    similarity: np.ndarray  # (L, L) float64
    pos_adj: np.ndarray  # (L, L) uint8, symmetric, zero diagonal
    neg_adj: np.ndarray  # (L, L) uint8, symmetric, zero diagonal
    delta_pos: float
    delta_neg: float
    percentile_pair: tuple[float, float]

    @property
    def n_labels(self) -> int:
        return self.pos_adj.shape[0]

    def edge_counts(self) -> tuple[int, int]:
        """(positive, negative) undirected edge counts."""
        return int(self.pos_adj.sum()) // 2, int(self.neg_adj.sum()) // 2


def threshold_graph(
    similarity: np.ndarray,
    percentile_pair: tuple[float, float] = DEFAULT_PERCENTILES,
) -> SignedLabelGraph:
    """Build the signed graph from a similarity matrix.

    The thresholds are nearest-rank percentiles of the off-diagonal
    upper-triangle similarity values.  Ties at a threshold are included.
    """
    low, high = float(percentile_pair[0]), float(percentile_pair[1])
    if not (0.0 < low < high < 100.0):
        raise ValidationError(
            f"percentile pair must satisfy 0 < low < high < 100, got ({low}, {high})"
        )
    n = similarity.shape[0]
    if similarity.ndim != 2 or similarity.shape != (n, n):
        raise ValidationError(f"similarity must be square, got shape {similarity.shape}")
    if n < 2:
        raise DegenerateThresholdError("need at least two labels to threshold similarities")

    iu, ju = np.triu_indices(n, k=1)
    values = np.sort(similarity[iu, ju])
    delta_neg = nearest_rank_percentile(values, low)
    delta_pos = nearest_rank_percentile(values, high)
    if delta_neg >= delta_pos:
        raise DegenerateThresholdError(
            f"degenerate similarity distribution: low threshold {delta_neg:.6f} >= "
            f"high threshold {delta_pos:.6f}; use a wider percentile pair"
        )

    off_diag = ~np.eye(n, dtype=bool)
    pos_adj = ((similarity >= delta_pos) & off_diag).astype(np.uint8)
    neg_adj = ((similarity <= delta_neg) & off_diag).astype(np.uint8)
    return SignedLabelGraph(
        similarity=similarity,
        pos_adj=pos_adj,
        neg_adj=neg_adj,
        delta_pos=delta_pos,
        delta_neg=delta_neg,
        percentile_pair=(low, high),
    )


@dataclass(frozen=True)
class BalancedNeighborhoods:
    """Signed walk counts per hop depth.

    ``dep_pos[k-1][u, v]`` counts length-k walks between u and v whose number
    of negative edges is even (``dep_neg`` odd).  The k-hop neighbourhoods of
    v are the nonzero entries of column v.
    """

    dep_pos: tuple[np.ndarray, ...]  # each (L, L) int64
    dep_neg: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return len(self.dep_pos)

    @property
    def n_labels(self) -> int:
        return self.dep_pos[0].shape[0]

    def pos_mask(self, k: int) -> np.ndarray:
        """Boolean (L, L) mask of the k-hop positive support, k in 1..depth."""
        return self.dep_pos[k - 1] > 0

    def neg_mask(self, k: int) -> np.ndarray:
        return self.dep_neg[k - 1] > 0

    def neighborhood(self, v: int, k: int, sign: str) -> np.ndarray:
        """Sorted label ids u in the k-hop neighbourhood of v for sign +/-."""
        dep = self.dep_pos if sign == "+" else self.dep_neg
        return np.flatnonzero(dep[k - 1][:, v] > 0)


def balanced_neighborhoods(
    graph: SignedLabelGraph,
    depth: int,
    zero_diagonal: bool = False,
) -> BalancedNeighborhoods:
    """Walk-parity counts for hops 1..depth.

    One hop is the adjacency itself.  Each further hop composes a single edge
    with the previous counts: a positive edge preserves parity, a negative
    edge flips it.  ``zero_diagonal`` drops the self-walks that appear at
    even depths.
    """
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    pos = graph.pos_adj.astype(np.int64)
    neg = graph.neg_adj.astype(np.int64)
    dep_pos = [pos.copy()]
    dep_neg = [neg.copy()]
    for _ in range(depth - 1):
        prev_pos, prev_neg = dep_pos[-1], dep_neg[-1]
        next_pos = pos.T @ prev_pos + neg.T @ prev_neg
        next_neg = pos.T @ prev_neg + neg.T @ prev_pos
        if zero_diagonal:
            np.fill_diagonal(next_pos, 0)
            np.fill_diagonal(next_neg, 0)
        dep_pos.append(next_pos)
        dep_neg.append(next_neg)
    for arr in (*dep_pos, *dep_neg):
        arr.flags.writeable = False
    return BalancedNeighborhoods(dep_pos=tuple(dep_pos), dep_neg=tuple(dep_neg))


def export_edge_list(graph: SignedLabelGraph, path: str | Path) -> None:
    """Write undirected edges as text lines ``u v sign`` for inspection."""
    lines = []
    n = graph.n_labels
    for u in range(n):
        for v in range(u + 1, n):
            if graph.pos_adj[u, v]:
                lines.append(f"{u} {v} +")
            if graph.neg_adj[u, v]:
                lines.append(f"{u} {v} -")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
