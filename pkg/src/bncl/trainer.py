"""Training loop with hand-derived backprop and a from-scratch Adam.

The forward pass (propagation.forward) keeps every layer's inputs and
pre-activations, so the backward pass just walks the layers in reverse:
the rectifier gates pass gradient only where the pre-activation was strictly
positive (the derivative at exactly zero is taken as zero), and each weight
gradient is masked by its hop support so weights outside a neighbourhood
keep an exactly-zero gradient.

Learning-rate schedule: step decay, ``lr * decay ** floor(epoch / step)``.
Shuffling and parameter init draw from PCG64 streams (see rng.stream), which
makes two runs with identical config and seed byte-identical.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .interchange import (
    SETTING_SCARCE,
    FeatureMatrix,
    SupervisionConfig,
    ValidationError,
    read_blocks,
    write_blocks,
)
from .label_graph import BalancedNeighborhoods
from .loss import LossBreakdown, LossConfig, total_loss, total_loss_grad
from .propagation import (
    W_NEG,
    W_POS,
    WBAR_NEG,
    WBAR_POS,
    HiddenStates,
    ModelParams,
    forward,
    init_hidden,
    init_params,
    masked_weights,
    params_from_blocks,
    params_to_blocks,
)
from .rng import stream

logger = logging.getLogger(__name__)

_SHUFFLE_STREAM = 1
_GRADCHECK_STREAM = 2

L2_POPULATION_MODES = ("batch", "dataset")


class NonFiniteLossError(Exception):
    """A loss component evaluated to NaN or infinity during training."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.8
    beta2: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 128
    epochs: int = 30
    lr_step: int = 10
    lr_decay: float = 0.9
    seed: int = 0
    # "batch" compares soft counts against batch_size * lambda; "dataset"
    # extrapolates each batch's counts to the full training population.
    l2_population: str = "batch"

    def validate(self) -> None:
        if self.learning_rate <= 0 or not np.isfinite(self.learning_rate):
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0):
                raise ValidationError(f"{name} must lie in [0, 1), got {value}")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr_step < 1:
            raise ValidationError(f"lr_step must be >= 1, got {self.lr_step}")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ValidationError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.l2_population not in L2_POPULATION_MODES:
            raise ValidationError(f"l2_population must be one of {L2_POPULATION_MODES}")


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "OptimizerState":
        return cls(m=np.zeros_like(params.weights), v=np.zeros_like(params.weights), t=0)


@dataclass
class EpochStats:
    epoch: int
    loss: LossBreakdown  # summed over the epoch's batches
    learning_rate: float
    elapsed_seconds: float


@dataclass
class TrainHistory:
    entries: list[EpochStats] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class TrainResult:
    params: ModelParams
    opt_state: OptimizerState
    history: TrainHistory
    supervision: SupervisionConfig  # with estimated statistics filled in


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Learning rate for a 0-based epoch index under step decay."""
    return config.learning_rate * config.lr_decay ** (epoch // config.lr_step)


def estimate_statistics(annotations: Mapping[int, np.ndarray]) -> tuple[float, np.ndarray]:
    """(kappa, lambdas) estimated by exact counting over the annotated set."""
    if not annotations:
        raise ValidationError("cannot estimate statistics from an empty annotation set")
    matrix = np.stack([np.asarray(annotations[k], dtype=np.float64) for k in sorted(annotations)])
    kappa = float(matrix.sum(axis=1).mean())
    lambdas = matrix.mean(axis=0)
    return kappa, lambdas


def resolve_supervision(supervision: SupervisionConfig) -> SupervisionConfig:
    """Fill missing kappa/lambdas by estimation in the scarce setting."""
    if supervision.setting == SETTING_SCARCE and (
        supervision.kappa is None or supervision.lambdas is None
    ):
        kappa, lambdas = estimate_statistics(supervision.annotations)
        logger.info(
            "estimated kappa=%.4f and per-label frequencies from %d annotated samples",
            kappa,
            len(supervision.annotations),
        )
        return replace(
            supervision,
            kappa=supervision.kappa if supervision.kappa is not None else kappa,
            lambdas=supervision.lambdas if supervision.lambdas is not None else lambdas,
        )
    return supervision


@dataclass
class Batch:
    """A slice of initial states plus annotations remapped to batch rows."""

    h0: np.ndarray
    hbar0: np.ndarray
    annotations: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.h0.shape[0]


def backward(
    states: HiddenStates,
    params: ModelParams,
    neighborhoods: BalancedNeighborhoods,
    dP: np.ndarray,
    dPbar: np.ndarray,
) -> np.ndarray:
    """Gradient of the loss w.r.t. every weight, given dL/dP and dL/dPbar."""
    grads = np.zeros_like(params.weights)
    dh = dP.copy()
    dhbar = dPbar.copy()
    for k in range(params.depth, 0, -1):
        h_in, hbar_in = states.states[k - 1]
        a_pos, a_barneg, a_neg, a_barpos = states.preacts[k - 1]
        w_pos, w_neg, wbar_pos, wbar_neg = masked_weights(params, neighborhoods, k)
        pos_mask = neighborhoods.pos_mask(k)
        neg_mask = neighborhoods.neg_mask(k)

        d_pos = dh * (a_pos > 0.0)
        d_barneg = dh * (a_barneg > 0.0)
        d_neg = dhbar * (a_neg > 0.0)
        d_barpos = dhbar * (a_barpos > 0.0)

        grads[k - 1, W_POS] = (h_in.T @ d_pos) * pos_mask
        grads[k - 1, W_NEG] = (h_in.T @ d_neg) * neg_mask
        grads[k - 1, WBAR_POS] = (hbar_in.T @ d_barpos) * pos_mask
        grads[k - 1, WBAR_NEG] = (hbar_in.T @ d_barneg) * neg_mask

        dh = dh + d_pos @ w_pos.T + d_neg @ w_neg.T
        dhbar = dhbar + d_barneg @ wbar_neg.T + d_barpos @ wbar_pos.T
    return grads


def compute_gradients(
    batch: Batch,
    params: ModelParams,
    neighborhoods: BalancedNeighborhoods,
    loss_config: LossConfig,
    supervision: SupervisionConfig,
    population: int | None = None,
    l2_count_scale: float = 1.0,
) -> tuple[np.ndarray, LossBreakdown]:
    """Forward, loss, and the exact gradient for one batch.

    ``population`` is the frequency-target population (the batch length when
    omitted); ``l2_count_scale`` rescales the batch's soft counts when the
    population is not the batch itself.
    """
    states = forward(batch.h0, batch.hbar0, params, neighborhoods)
    batch_supervision = replace(supervision, annotations=batch.annotations)
    breakdown, dP, dPbar = total_loss_grad(
        states.p,
        states.pbar,
        loss_config,
        batch_supervision,
        batch.size if population is None else population,
        l2_count_scale,
    )
    for name, value in (
        ("hesitancy", breakdown.l1),
        ("label-frequency", breakdown.l2),
        ("cardinality", breakdown.l3),
        ("annotated", breakdown.l4),
    ):
        if not np.isfinite(value):
            raise NonFiniteLossError(f"{name} loss component is non-finite ({value})")
    grads = backward(states, params, neighborhoods, dP, dPbar)
    return grads, breakdown


def adam_step(
    params: ModelParams,
    grads: np.ndarray,
    state: OptimizerState,
    learning_rate: float,
    config: TrainConfig,
) -> None:
    """One Adam update, in place, with bias correction."""
    state.t += 1
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads * grads
    m_hat = state.m / (1.0 - config.beta1**state.t)
    v_hat = state.v / (1.0 - config.beta2**state.t)
    params.weights -= learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)


def _sum_breakdowns(parts: list[LossBreakdown]) -> LossBreakdown:
    return LossBreakdown(
        l1=sum(p.l1 for p in parts),
        l2=sum(p.l2 for p in parts),
        l3=sum(p.l3 for p in parts),
        l4=sum(p.l4 for p in parts),
        total=sum(p.total for p in parts),
        active=parts[0].active,
    )


def train(
    features: FeatureMatrix,
    supervision: SupervisionConfig,
    neighborhoods: BalancedNeighborhoods,
    train_config: TrainConfig,
    loss_config: LossConfig,
    initial_params: ModelParams | None = None,
    initial_opt_state: OptimizerState | None = None,
    start_epoch: int = 0,
) -> TrainResult:
    """Mini-batch training; resumable by passing a loaded checkpoint's state.

    Partial trailing batches are kept.  The frequency target population is
    the actual batch length (or the dataset size under
    ``l2_population="dataset"``, where each batch's counts are extrapolated).
    """
    train_config.validate()
    loss_config.validate()
    n_labels = features.n_labels
    supervision.validate(n_labels, n_train=features.n_samples)
    supervision = resolve_supervision(supervision)

    params = initial_params if initial_params is not None else init_params(
        n_labels, neighborhoods.depth, train_config.seed
    )
    opt_state = initial_opt_state if initial_opt_state is not None else OptimizerState.zeros_like(params)

    h0_all, hbar0_all = init_hidden(features)
    n = features.n_samples
    shuffle_rng = stream(train_config.seed, _SHUFFLE_STREAM)
    for _ in range(start_epoch):  # resume: replay the skipped epochs' shuffles
        shuffle_rng.permutation(n)
    history = TrainHistory()

    for epoch in range(start_epoch, train_config.epochs):
        started = time.perf_counter()
        lr = lr_at(epoch, train_config)
        order = shuffle_rng.permutation(n)
        parts = []
        for lo in range(0, n, train_config.batch_size):
            idx = order[lo : lo + train_config.batch_size]
            annotations = {}
            for pos, sample in enumerate(idx):
                vec = supervision.annotations.get(int(sample))
                if vec is not None:
                    annotations[pos] = vec
            batch = Batch(h0=h0_all[idx], hbar0=hbar0_all[idx], annotations=annotations)
            if train_config.l2_population == "dataset":
                population, scale = n, n / batch.size
            else:
                population, scale = batch.size, 1.0
            grads, breakdown = compute_gradients(
                batch, params, neighborhoods, loss_config, supervision,
                population=population, l2_count_scale=scale,
            )
            adam_step(params, grads, opt_state, lr, train_config)
            parts.append(breakdown)
        elapsed = time.perf_counter() - started
        stats = EpochStats(
            epoch=epoch,
            loss=_sum_breakdowns(parts) if parts else LossBreakdown(0, 0, 0, 0, 0, (True, False, False, False)),
            learning_rate=lr,
            elapsed_seconds=elapsed,
        )
        history.entries.append(stats)
        logger.info(
            "epoch %d/%d lr=%.3e total=%.4f (l1=%.4f l2=%.4f l3=%.4f l4=%.4f) %.2fs",
            epoch + 1,
            train_config.epochs,
            lr,
            stats.loss.total,
            stats.loss.l1,
            stats.loss.l2,
            stats.loss.l3,
            stats.loss.l4,
            elapsed,
        )
    return TrainResult(params=params, opt_state=opt_state, history=history, supervision=supervision)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    mean_rel_error: float
    n_checked: int
    n_kink_skipped: int  # finite-difference pairs straddling a rectifier/clamp kink
    n_masked_excluded: int  # weights outside any neighbourhood support

    def passed(self, bound: float) -> bool:
        return self.n_checked > 0 and self.max_rel_error <= bound


def _loss_and_pattern(
    batch: Batch,
    params: ModelParams,
    neighborhoods: BalancedNeighborhoods,
    loss_config: LossConfig,
    supervision: SupervisionConfig,
):
    """Loss value plus the activation/clamp sign pattern of the evaluation.

    The pattern lets the checker detect when a finite-difference pair lands
    on different sides of a non-differentiable point.
    """
    states = forward(batch.h0, batch.hbar0, params, neighborhoods)
    batch_supervision = replace(supervision, annotations=batch.annotations)
    breakdown = total_loss(states.p, states.pbar, loss_config, batch_supervision, batch.size)
    gates = [a > 0.0 for pre in states.preacts for a in pre]
    from .loss import CLAMP_EPS  # local import to keep module load light

    gates.append(states.p > CLAMP_EPS)
    gates.append(states.p < 1.0)
    gates.append(states.pbar > CLAMP_EPS)
    gates.append(states.pbar < 1.0)
    pattern = np.concatenate([g.ravel() for g in gates])
    return breakdown.total, pattern


def grad_check(
    params: ModelParams,
    batch: Batch,
    neighborhoods: BalancedNeighborhoods,
    loss_config: LossConfig,
    supervision: SupervisionConfig,
    n_entries: int = 120,
    fd_step: float = 1e-4,
    seed: int = 0,
    self_test_corrupt: bool = False,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Samples up to ``n_entries`` weights from the neighbourhood support
    (masked weights carry no gradient by construction and are excluded, their
    count reported).  Relative error is |analytic - numeric| over
    max(|analytic|, |numeric|, 1e-6).  Pairs whose two evaluations disagree
    on any rectifier or clamp gate are skipped: a central difference across a
    kink does not estimate a derivative.

    ``self_test_corrupt`` flips the sign of one sampled analytic entry so the
    checker can demonstrate that it catches a wrong gradient.
    """
    analytic, _ = compute_gradients(batch, params, neighborhoods, loss_config, supervision)

    support = np.zeros_like(params.weights, dtype=bool)
    for k in range(1, params.depth + 1):
        pos = neighborhoods.pos_mask(k)
        neg = neighborhoods.neg_mask(k)
        support[k - 1, W_POS] = pos
        support[k - 1, WBAR_POS] = pos
        support[k - 1, W_NEG] = neg
        support[k - 1, WBAR_NEG] = neg

    candidates = np.argwhere(support)
    n_masked = int(support.size - candidates.shape[0])
    if candidates.shape[0] == 0:
        return GradCheckReport(0.0, 0.0, 0, 0, n_masked)

    rng = stream(seed, _GRADCHECK_STREAM)
    take = min(n_entries, candidates.shape[0])
    chosen = candidates[rng.choice(candidates.shape[0], size=take, replace=False)]

    if self_test_corrupt:
        analytic = analytic.copy()
        k, role, u, v = chosen[0]
        analytic[k, role, u, v] = -analytic[k, role, u, v] - 1.0

    errors = []
    kinks = 0
    work = params.copy()
    for k, role, u, v in chosen:
        original = work.weights[k, role, u, v]
        work.weights[k, role, u, v] = original + fd_step
        f_plus, pat_plus = _loss_and_pattern(batch, work, neighborhoods, loss_config, supervision)
        work.weights[k, role, u, v] = original - fd_step
        f_minus, pat_minus = _loss_and_pattern(batch, work, neighborhoods, loss_config, supervision)
        work.weights[k, role, u, v] = original
        if not np.array_equal(pat_plus, pat_minus):
            kinks += 1
            continue
        numeric = (f_plus - f_minus) / (2.0 * fd_step)
        a = analytic[k, role, u, v]
        denom = max(abs(a), abs(numeric), 1e-6)
        errors.append(abs(a - numeric) / denom)

    if not errors:
        return GradCheckReport(0.0, 0.0, 0, kinks, n_masked)
    arr = np.asarray(errors)
    return GradCheckReport(
        max_rel_error=float(arr.max()),
        mean_rel_error=float(arr.mean()),
        n_checked=len(errors),
        n_kink_skipped=kinks,
        n_masked_excluded=n_masked,
    )


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    params: ModelParams
    opt_state: OptimizerState
    epochs_completed: int
    percentile_pair: tuple[float, float]

    @property
    def depth(self) -> int:
        return self.params.depth


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    opt_state: OptimizerState,
    epochs_completed: int,
    percentile_pair: tuple[float, float],
) -> None:
    """Write a resumable checkpoint as a multi-block envelope file.

    Block 0 is a scalar header [epochs, adam step, depth, labels, low pct,
    high pct]; then the weight matrices (per layer: W+, W-, Wbar+, Wbar-),
    then the first-moment matrices, then the second-moment matrices in the
    same order.
    """
    header = np.array(
        [
            [epochs_completed, opt_state.t, params.depth, params.n_labels,
             percentile_pair[0], percentile_pair[1]]
        ],
        dtype=np.float32,
    )
    blocks = [header]
    blocks.extend(params_to_blocks(params))
    blocks.extend(params_to_blocks(ModelParams(weights=opt_state.m)))
    blocks.extend(params_to_blocks(ModelParams(weights=opt_state.v)))
    write_blocks(path, blocks)


def load_checkpoint(path: str | Path) -> Checkpoint:
    blocks = read_blocks(path)
    if not blocks:
        raise ValidationError(f"{path}: empty checkpoint")
    header = blocks[0].ravel()
    if header.shape[0] != 6:
        raise ValidationError(f"{path}: malformed checkpoint header")
    epochs_completed = int(header[0])
    adam_t = int(header[1])
    depth = int(header[2])
    n_labels = int(header[3])
    percentile_pair = (float(header[4]), float(header[5]))
    expected = 1 + 12 * depth
    if len(blocks) != expected:
        raise ValidationError(f"{path}: expected {expected} blocks, found {len(blocks)}")
    per = 4 * depth
    params = params_from_blocks(blocks[1 : 1 + per], n_labels)
    m = params_from_blocks(blocks[1 + per : 1 + 2 * per], n_labels)
    v = params_from_blocks(blocks[1 + 2 * per : 1 + 3 * per], n_labels)
    opt_state = OptimizerState(m=m.weights, v=v.weights, t=adam_t)
    return Checkpoint(
        params=params,
        opt_state=opt_state,
        epochs_completed=epochs_completed,
        percentile_pair=percentile_pair,
    )
