"""Weakly supervised multi-label classification over a signed label graph.

The pipeline: per-label entailment features come in through the interchange
formats, label descriptions induce a signed dependency graph, balance-theory
message passing refines the per-label evidence, and a collective loss trains
the propagation weights from dataset-level statistics instead of per-sample
labels.
"""

from .interchange import (
    FeatureMatrix,
    GroundTruth,
    LabelEmbeddings,
    LabelSpace,
    Manifest,
    SupervisionConfig,
    ValidationError,
    load_embeddings,
    load_features,
    load_ground_truth,
    load_manifest,
    save_embeddings,
    save_features,
    save_ground_truth,
    save_manifest,
)
from .label_graph import (
    BalancedNeighborhoods,
    DegenerateThresholdError,
    SignedLabelGraph,
    balanced_neighborhoods,
    embed_labels,
    similarity_matrix,
    threshold_graph,
)
from .loss import LossBreakdown, LossConfig, surrogate_indicator, total_loss
from .metrics import MetricsReport, compute_all
from .propagation import ModelParams, baseline_0shot, forward, init_hidden, init_params, predict
from .synth import SynthBundle, SynthConfig, generate, quantize_label_frequencies
from .trainer import TrainConfig, TrainResult, grad_check, train

__version__ = "0.1.0"
