"""Collective training loss over final states (P, Pbar).

Four components, each returning a plain float:

* hesitancy: per sample the Euclidean norm of p + pbar - 1, summed.  Pulls
  each label's two states toward a settled, complementary decision.
* label frequency: squared gap between the expected positive count
  ``population * lambda_l`` and the soft predicted count per label.
* cardinality: per sample the squared gap between kappa and the soft
  predicted label count.
* annotated: binary cross-entropy against the annotated samples, with both
  states clamped to [CLAMP_EPS, 1] before the logarithms.

Counts are made differentiable by the surrogate indicator
``s = sigmoid(sharpness * (p - pbar))``, a steep approximation of the
prediction rule p > pbar.  The total is l1 + a2*l2 + a3*l3 + a4*l4; disabled
or inapplicable components contribute exactly zero and are flagged inactive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .interchange import SupervisionConfig, ValidationError

CLAMP_EPS = 1e-7
_EXP_CLAMP = 500.0

DEFAULT_ALPHA2 = 0.1
DEFAULT_ALPHA3 = 0.5
DEFAULT_ALPHA4 = 100.0
DEFAULT_SHARPNESS = 10.0


@dataclass
class LossConfig:
    alpha2: float = DEFAULT_ALPHA2
    alpha3: float = DEFAULT_ALPHA3
    alpha4: float = DEFAULT_ALPHA4
    sharpness: float = DEFAULT_SHARPNESS
    disable_l2: bool = False
    disable_l3: bool = False

    def validate(self) -> None:
        for name in ("alpha2", "alpha3", "alpha4"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")
        if not np.isfinite(self.sharpness) or self.sharpness <= 1.0:
            raise ValidationError(f"sharpness must exceed 1, got {self.sharpness}")


@dataclass
class LossBreakdown:
    """Raw component values, their weighted total, and which were active."""

    l1: float
    l2: float
    l3: float
    l4: float
    total: float
    active: tuple[bool, bool, bool, bool]


def surrogate_indicator(p, pbar, sharpness: float = DEFAULT_SHARPNESS):
    """Steep sigmoid of the decision margin; ~1[p > pbar] for large margins."""
    z = sharpness * (np.asarray(p, dtype=np.float64) - np.asarray(pbar, dtype=np.float64))
    z = np.clip(z, -_EXP_CLAMP, _EXP_CLAMP)
    return 1.0 / (1.0 + np.exp(-z))


def _as_states(P, Pbar) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(P, dtype=np.float64)
    Pbar = np.asarray(Pbar, dtype=np.float64)
    if P.shape != Pbar.shape or P.ndim != 2:
        raise ValidationError(f"state shapes disagree: {P.shape} vs {Pbar.shape}")
    return P, Pbar


def _hesitancy_grad(P, Pbar):
    resid = P + Pbar - 1.0
    norms = np.linalg.norm(resid, axis=1)
    value = float(norms.sum())
    safe = np.where(norms > 0.0, norms, 1.0)
    grad = resid / safe[:, None]
    grad[norms == 0.0] = 0.0
    return value, grad, grad.copy()


def _surrogate_grad(P, Pbar, sharpness):
    s = surrogate_indicator(P, Pbar, sharpness)
    ds = sharpness * s * (1.0 - s)  # d s / d p; d s / d pbar is its negation
    return s, ds


def _label_frequency_grad(P, Pbar, lambdas, sharpness, population, count_scale=1.0):
    lam = np.asarray(lambdas, dtype=np.float64)
    s, ds = _surrogate_grad(P, Pbar, sharpness)
    gap = population * lam - count_scale * s.sum(axis=0)
    value = float(np.dot(gap, gap))
    d_s = (-2.0 * count_scale) * gap[None, :]
    dP = d_s * ds
    return value, dP, -dP


def _cardinality_grad(P, Pbar, kappa, sharpness):
    s, ds = _surrogate_grad(P, Pbar, sharpness)
    gap = kappa - s.sum(axis=1)
    value = float(np.dot(gap, gap))
    d_s = -2.0 * gap[:, None]
    dP = d_s * ds
    return value, dP, -dP


def _annotated_grad(P, Pbar, annotations: Mapping[int, np.ndarray]):
    value = 0.0
    dP = np.zeros_like(P)
    dPbar = np.zeros_like(Pbar)
    for row in sorted(annotations):
        y = np.asarray(annotations[row], dtype=np.float64)
        p = np.clip(P[row], CLAMP_EPS, 1.0)
        pbar = np.clip(Pbar[row], CLAMP_EPS, 1.0)
        value -= float(np.dot(y, np.log(p)) + np.dot(1.0 - y, np.log(pbar)))
        in_p = (P[row] > CLAMP_EPS) & (P[row] < 1.0)
        in_pbar = (Pbar[row] > CLAMP_EPS) & (Pbar[row] < 1.0)
        dP[row] = np.where(in_p, -y / p, 0.0)
        dPbar[row] = np.where(in_pbar, -(1.0 - y) / pbar, 0.0)
    return value, dP, dPbar


def loss_hesitancy(P, Pbar) -> float:
    """Sum over samples of the 2-norm of p + pbar - 1."""
    P, Pbar = _as_states(P, Pbar)
    return _hesitancy_grad(P, Pbar)[0]


def loss_label_frequency(P, Pbar, lambdas, sharpness: float, population: int) -> float:
    """Sum over labels of (population * lambda_l - soft positive count)^2."""
    P, Pbar = _as_states(P, Pbar)
    if population <= 0:
        raise ValidationError(f"population must be positive, got {population}")
    return _label_frequency_grad(P, Pbar, lambdas, sharpness, population)[0]


def loss_cardinality(P, Pbar, kappa: float, sharpness: float) -> float:
    """Sum over samples of (kappa - soft predicted cardinality)^2."""
    P, Pbar = _as_states(P, Pbar)
    return _cardinality_grad(P, Pbar, kappa, sharpness)[0]


def loss_annotated(P, Pbar, annotations: Mapping[int, np.ndarray]) -> float:
    """Cross-entropy on annotated rows.

    ``annotations`` maps row indices of P to 0/1 vectors: positives score
    -log p, negatives -log pbar, both clamped to [CLAMP_EPS, 1].
    """
    P, Pbar = _as_states(P, Pbar)
    for row in annotations:
        if row < 0 or row >= P.shape[0]:
            raise ValidationError(f"annotated row {row} is outside the batch")
    return _annotated_grad(P, Pbar, annotations)[0]


def total_loss(
    P,
    Pbar,
    config: LossConfig,
    supervision: SupervisionConfig,
    population: int,
    l2_count_scale: float = 1.0,
) -> LossBreakdown:
    """Weighted total with the component breakdown; see total_loss_grad."""
    return total_loss_grad(P, Pbar, config, supervision, population, l2_count_scale)[0]


def total_loss_grad(
    P,
    Pbar,
    config: LossConfig,
    supervision: SupervisionConfig,
    population: int,
    l2_count_scale: float = 1.0,
) -> tuple[LossBreakdown, np.ndarray, np.ndarray]:
    """Breakdown plus the gradients of the total w.r.t. P and Pbar.

    The frequency and cardinality components are active when their statistics
    are available and not explicitly disabled; the annotated component is
    active when the supervision carries annotations.  ``annotations`` keys
    are row indices into P (callers remap dataset ids to batch rows).
    """
    config.validate()
    P, Pbar = _as_states(P, Pbar)
    if population <= 0:
        raise ValidationError(f"population must be positive, got {population}")

    l1, dP, dPbar = _hesitancy_grad(P, Pbar)

    l2 = 0.0
    l2_active = not config.disable_l2 and supervision.lambdas is not None
    if l2_active:
        val, gP, gPbar = _label_frequency_grad(
            P, Pbar, supervision.lambdas, config.sharpness, population, l2_count_scale
        )
        l2 = val
        dP += config.alpha2 * gP
        dPbar += config.alpha2 * gPbar

    l3 = 0.0
    l3_active = not config.disable_l3 and supervision.kappa is not None
    if l3_active:
        val, gP, gPbar = _cardinality_grad(P, Pbar, supervision.kappa, config.sharpness)
        l3 = val
        dP += config.alpha3 * gP
        dPbar += config.alpha3 * gPbar

    l4 = 0.0
    l4_active = bool(supervision.annotations)
    if l4_active:
        for row in supervision.annotations:
            if row < 0 or row >= P.shape[0]:
                raise ValidationError(f"annotated row {row} is outside the batch")
        val, gP, gPbar = _annotated_grad(P, Pbar, supervision.annotations)
        l4 = val
        dP += config.alpha4 * gP
        dPbar += config.alpha4 * gPbar

    total = l1 + config.alpha2 * l2 + config.alpha3 * l3 + config.alpha4 * l4
    breakdown = LossBreakdown(
        l1=l1, l2=l2, l3=l3, l4=l4, total=total, active=(True, l2_active, l3_active, l4_active)
    )
    return breakdown, dP, dPbar
