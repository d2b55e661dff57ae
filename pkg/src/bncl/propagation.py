"""Message passing over balanced neighbourhoods.

Two state vectors evolve per sample: the entailment state h (initialised to
the per-label entailment probabilities q) and the contradiction state h-bar
(initialised to the contradiction probabilities).  Layer k adds to each label
v the rectified weighted sum of its k-hop neighbours' states:

    h_v      <- h_v    + relu(sum over u in N_v^(k,+) of W+[u,v]    * h_u)
                       + relu(sum over u in N_v^(k,-) of Wbar-[u,v] * hbar_u)
    hbar_v   <- hbar_v + relu(sum over u in N_v^(k,-) of W-[u,v]    * h_u)
                       + relu(sum over u in N_v^(k,+) of Wbar+[u,v] * hbar_u)

so allies reinforce a label's presence while opponents with strong evidence
push its contradiction state up.  The final states p = h^(K), pbar = hbar^(K)
decide the predicted label set: predict l exactly when p_l > pbar_l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interchange import FeatureMatrix, ValidationError
from .label_graph import BalancedNeighborhoods
from .rng import stream

# Roles along axis 1 of ModelParams.weights, and the serialization order.
W_POS, W_NEG, WBAR_POS, WBAR_NEG = 0, 1, 2, 3
INIT_SCALE = 0.01
_PARAM_STREAM = 0


@dataclass
class ModelParams:
    """Per-layer weight matrices, indexed [layer, role, u, v].

    Role order: W+ (ally evidence into h), W- (opponent evidence into hbar),
    Wbar+ (ally contradiction into hbar), Wbar- (opponent contradiction
    into h).  Entry [u, v] weights the message from label u to label v.
    """

    weights: np.ndarray  # (depth, 4, L, L) float64

    @property
    def depth(self) -> int:
        return self.weights.shape[0]

    @property
    def n_labels(self) -> int:
        return self.weights.shape[2]

    def copy(self) -> "ModelParams":
        return ModelParams(weights=self.weights.copy())


def init_params(n_labels: int, depth: int, seed: int) -> ModelParams:
    """I.i.d. uniform weights on [-INIT_SCALE, INIT_SCALE], seed-determined."""
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    rng = stream(seed, _PARAM_STREAM)
    weights = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(depth, 4, n_labels, n_labels))
    return ModelParams(weights=weights)


def init_hidden(features: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Initial (h, hbar) states: the entailment and contradiction channels."""
    h0 = features.entailment.astype(np.float64)
    hbar0 = features.contradiction.astype(np.float64)
    return h0, hbar0


@dataclass
class HiddenStates:
    """Forward trace: states per layer plus pre-activations for backprop."""

    states: list[tuple[np.ndarray, np.ndarray]]  # length depth+1, each (N, L)
    preacts: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]  # length depth

    @property
    def depth(self) -> int:
        return len(self.preacts)

    @property
    def p(self) -> np.ndarray:
        """Final entailment state."""
        return self.states[-1][0]

    @property
    def pbar(self) -> np.ndarray:
        """Final contradiction state."""
        return self.states[-1][1]


def masked_weights(params: ModelParams, neighborhoods: BalancedNeighborhoods, k: int):
    """The four weight matrices of layer k restricted to their hop support."""
    pos = neighborhoods.pos_mask(k)
    neg = neighborhoods.neg_mask(k)
    layer = params.weights[k - 1]
    return layer[W_POS] * pos, layer[W_NEG] * neg, layer[WBAR_POS] * pos, layer[WBAR_NEG] * neg


def forward(
    h0: np.ndarray,
    hbar0: np.ndarray,
    params: ModelParams,
    neighborhoods: BalancedNeighborhoods,
) -> HiddenStates:
    """Run all layers, keeping the per-layer trace."""
    if params.depth != neighborhoods.depth:
        raise ValidationError(
            f"params depth {params.depth} != neighbourhood depth {neighborhoods.depth}"
        )
    if h0.shape != hbar0.shape or h0.ndim != 2 or h0.shape[1] != params.n_labels:
        raise ValidationError(
            f"state shapes {h0.shape}/{hbar0.shape} do not fit {params.n_labels} labels"
        )
    h = np.asarray(h0, dtype=np.float64)
    hbar = np.asarray(hbar0, dtype=np.float64)
    states = [(h, hbar)]
    preacts = []
    for k in range(1, params.depth + 1):
        w_pos, w_neg, wbar_pos, wbar_neg = masked_weights(params, neighborhoods, k)
        a_pos = h @ w_pos  # ally entailment into h
        a_barneg = hbar @ wbar_neg  # opponent contradiction into h
        a_neg = h @ w_neg  # opponent entailment into hbar
        a_barpos = hbar @ wbar_pos  # ally contradiction into hbar
        h = h + np.maximum(a_pos, 0.0) + np.maximum(a_barneg, 0.0)
        hbar = hbar + np.maximum(a_neg, 0.0) + np.maximum(a_barpos, 0.0)
        states.append((h, hbar))
        preacts.append((a_pos, a_barneg, a_neg, a_barpos))
    return HiddenStates(states=states, preacts=preacts)


def predict(states: HiddenStates) -> np.ndarray:
    """Predicted binary label matrix: 1 exactly where p > pbar (strict)."""
    return (states.p > states.pbar).astype(np.uint8)


def baseline_0shot(features: FeatureMatrix) -> np.ndarray:
    """The no-model baseline: the prediction rule applied to raw features."""
    return (features.entailment > features.contradiction).astype(np.uint8)


def params_to_blocks(params: ModelParams) -> list[np.ndarray]:
    """Serialization order: for each layer, W+, W-, Wbar+, Wbar-."""
    blocks = []
    for k in range(params.depth):
        for role in (W_POS, W_NEG, WBAR_POS, WBAR_NEG):
            blocks.append(params.weights[k, role].astype(np.float32))
    return blocks


def params_from_blocks(blocks: list[np.ndarray], n_labels: int) -> ModelParams:
    if len(blocks) % 4 != 0 or not blocks:
        raise ValidationError(f"expected a multiple of 4 weight blocks, got {len(blocks)}")
    depth = len(blocks) // 4
    weights = np.zeros((depth, 4, n_labels, n_labels), dtype=np.float64)
    for idx, block in enumerate(blocks):
        plane = block[:, :, 0] if block.ndim == 3 else block
        if plane.shape != (n_labels, n_labels):
            raise ValidationError(
                f"weight block {idx} has shape {plane.shape}, expected ({n_labels}, {n_labels})"
            )
        weights[idx // 4, idx % 4] = plane.astype(np.float64)
    return ModelParams(weights=weights)
