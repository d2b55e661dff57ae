"""Shared builders for the test suite: random graphs, states, and oracles."""

from __future__ import annotations

import numpy as np

from bncl.interchange import FeatureMatrix
from bncl.label_graph import BalancedNeighborhoods, SignedLabelGraph

# The percentile pair selected for the default dataset (best annotation-free
# test score among the candidate pairs).
DEFAULT_PAIR = (30.0, 70.0)


def random_signed_graph(rng: np.random.Generator, n_labels: int,
                        p_pos: float = 0.3, p_neg: float = 0.2) -> SignedLabelGraph:
    """A random symmetric signed graph with disjoint edge sets.

    Built directly (not via thresholding) so graph-consuming code can be
    tested on arbitrary topologies, including ones percentile thresholds
    would never produce.
    """
    pos = np.zeros((n_labels, n_labels), dtype=np.uint8)
    neg = np.zeros((n_labels, n_labels), dtype=np.uint8)
    for u in range(n_labels):
        for v in range(u + 1, n_labels):
            draw = rng.random()
            if draw < p_pos:
                pos[u, v] = pos[v, u] = 1
            elif draw < p_pos + p_neg:
                neg[u, v] = neg[v, u] = 1
    similarity = np.eye(n_labels)
    return SignedLabelGraph(
        similarity=similarity,
        pos_adj=pos,
        neg_adj=neg,
        delta_pos=1.0,
        delta_neg=-1.0,
        percentile_pair=(10.0, 90.0),
    )


def enumerate_walk_parity(graph: SignedLabelGraph, depth: int) -> tuple[list, list]:
    """Walk counts by exhaustive enumeration, the slow reference.

    Returns (even, odd): per hop count k (1-based) the (L, L) matrices whose
    [u, v] entry counts length-k walks from u to v with an even (odd) number
    of negative edges.  Walks may revisit vertices and edges.
    """
    n = graph.n_labels
    edges = []  # (u, v, sign) directed
    for u in range(n):
        for v in range(n):
            if graph.pos_adj[u, v]:
                edges.append((u, v, 0))
            if graph.neg_adj[u, v]:
                edges.append((u, v, 1))
    by_start: dict[int, list] = {u: [] for u in range(n)}
    for u, v, s in edges:
        by_start[u].append((v, s))

    even = [np.zeros((n, n), dtype=np.int64) for _ in range(depth)]
    odd = [np.zeros((n, n), dtype=np.int64) for _ in range(depth)]

    def walk(start: int, node: int, parity: int, length: int) -> None:
        if length > 0:
            target = even if parity == 0 else odd
            target[length - 1][start, node] += 1
        if length == depth:
            return
        for nxt, sign in by_start[node]:
            walk(start, nxt, parity ^ sign, length + 1)

    for start in range(n):
        walk(start, start, 0, 0)
    return even, odd


def random_simplex_features(rng: np.random.Generator, n: int, n_labels: int) -> FeatureMatrix:
    """Random rows on the probability simplex, away from the corners."""
    data = rng.dirichlet((2.0, 2.0, 2.0), size=(n, n_labels)).astype(np.float32)
    matrix = FeatureMatrix(data=data)
    matrix.validate()
    return matrix


def forward_scalar_oracle(h0: np.ndarray, hbar0: np.ndarray, weights: np.ndarray,
                          neighborhoods: BalancedNeighborhoods) -> tuple[np.ndarray, np.ndarray]:
    """The layer update written as explicit loops over samples and labels."""
    h = h0.astype(np.float64).copy()
    hbar = hbar0.astype(np.float64).copy()
    n, n_labels = h.shape
    depth = neighborhoods.depth
    for k in range(1, depth + 1):
        pos = neighborhoods.pos_mask(k)
        neg = neighborhoods.neg_mask(k)
        w_pos, w_neg, wbar_pos, wbar_neg = weights[k - 1]
        new_h = h.copy()
        new_hbar = hbar.copy()
        for i in range(n):
            for v in range(n_labels):
                ally_h = sum(w_pos[u, v] * h[i, u] for u in range(n_labels) if pos[u, v])
                foe_bar = sum(wbar_neg[u, v] * hbar[i, u] for u in range(n_labels) if neg[u, v])
                foe_h = sum(w_neg[u, v] * h[i, u] for u in range(n_labels) if neg[u, v])
                ally_bar = sum(wbar_pos[u, v] * hbar[i, u] for u in range(n_labels) if pos[u, v])
                new_h[i, v] += max(ally_h, 0.0) + max(foe_bar, 0.0)
                new_hbar[i, v] += max(foe_h, 0.0) + max(ally_bar, 0.0)
        h, hbar = new_h, new_hbar
    return h, hbar


def metrics_scalar_oracle(truth: np.ndarray, predictions: np.ndarray) -> dict[str, float]:
    """All five metrics computed per instance with plain Python loops."""
    m, n_labels = truth.shape
    exact = 0
    agree_bits = 0
    eb_sum = 0.0
    tp = [0] * n_labels
    fp = [0] * n_labels
    fn = [0] * n_labels
    for i in range(m):
        y = [int(truth[i, l]) for l in range(n_labels)]
        z = [int(predictions[i, l]) for l in range(n_labels)]
        if y == z:
            exact += 1
        inter = 0
        for l in range(n_labels):
            if y[l] == z[l]:
                agree_bits += 1
            if y[l] == 1 and z[l] == 1:
                inter += 1
                tp[l] += 1
            elif y[l] == 0 and z[l] == 1:
                fp[l] += 1
            elif y[l] == 1 and z[l] == 0:
                fn[l] += 1
        eb_sum += 2.0 * inter / (sum(y) + sum(z))
    micro = 2.0 * sum(tp) / (2.0 * sum(tp) + sum(fp) + sum(fn))
    per_label = []
    for l in range(n_labels):
        denom = 2 * tp[l] + fp[l] + fn[l]
        per_label.append(2.0 * tp[l] / denom if denom > 0 else 0.0)
    return {
        "accuracy": exact / m,
        "hamming_accuracy": agree_bits / (m * n_labels),
        "example_f1": eb_sum / m,
        "micro_f1": micro,
        "macro_f1": sum(per_label) / n_labels,
        "tp": tp,
        "fp": fp,
        "fn": fn,
    }
