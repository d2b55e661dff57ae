"""Synthetic multi-label corpus generator.

Labels are partitioned into contiguous clusters.  Each sample picks a home
cluster, includes each member label with a probability rescaled so the
expected cardinality hits the target kappa, and each outside label with a
small probability shrunk by the cross-cluster exclusion strength.  Samples
that come up empty get one uniformly chosen home-cluster label.

Features mimic an entailment model reading the sample: a present label gets
most of its mass on the entailment channel, an absent label on the
contradiction channel, each with a fixed neutral share and a small jittered
remainder.  Two corruptions then degrade this oracle signal.  First, an
evenly spaced subset of "hard" labels models topics the entailment reader
is miscalibrated on: present entries collapse to a coin flip (a draw at
the uniform simplex point) at a rate tied to the noise level, while absent
entries flip to confident entailment-style evidence at exactly the rate
that replaces the lost firing mass.  A hard label therefore fires at the
correct frequency but on partly wrong samples, which frequency supervision
cannot see; per-sample annotations expose both halves directly, and the
collapsed entries are cheap to lift with small sibling message weights.
Second, a ``noise`` fraction of all entries is replaced by a draw near the
uniform simplex point with a mild entailment lean, i.e. the model
shrugging the way zero-shot readers shrug: toward yes.  These entries
carry little margin and mostly fire, a diffuse over-prediction that
frequency supervision is good at cleaning up.  All corruption rates scale
with ``noise`` and vanish when it is zero, so noiseless features remain
oracle predictions.

Label embeddings sit at orthonormal cluster centroids plus isotropic jitter,
so intra-cluster cosine similarity is high and cross-cluster similarity is
near zero.  The exact kappa, per-label frequencies and a small annotated
subset are computed from the generated training truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .interchange import (
    SETTING_ANNOTATION_FREE,
    SETTING_DOMAIN,
    SETTING_SCARCE,
    FeatureMatrix,
    GroundTruth,
    LabelEmbeddings,
    LabelSpace,
    SupervisionConfig,
    ValidationError,
    save_embeddings,
    save_features,
    save_ground_truth,
    save_manifest,
)
from .rng import stream

_TRUTH_TRAIN_STREAM = 0
_TRUTH_TEST_STREAM = 1
_FEATURE_TRAIN_STREAM = 2
_FEATURE_TEST_STREAM = 3
_EMBEDDING_STREAM = 4
_ANNOTATION_STREAM = 5

# Spread of the clean-channel remainder.
_CLEAN_JITTER = 0.1
# Dirichlet concentration of shrug draws: near-neutral with a mild
# entailment lean, mean (0.42, 0.32, 0.26) over (q, qtilde, qbar).
_SHRUG_ALPHA = (10.5, 8.0, 6.5)
# Dirichlet concentration of collapsed hard-label present entries: an
# unbiased coin flip at the uniform simplex point.
_COLLAPSE_ALPHA = (25.0 / 3.0, 25.0 / 3.0, 25.0 / 3.0)
# A hard label's present entries collapse at rate min(1, scale * noise).
_HARD_RATE_SCALE = 2.0
# Hallucination surplus: hard-label absent entries flip to confident
# entailment at this multiple of the rate that replaces the firing mass
# the collapsed presents lose (a collapsed entry still fires half the
# time, hence the factor one half at surplus 1).
_HARD_SURPLUS = 1.0
# Uniform candidate draws scored when picking the annotated subset.
_ANNOTATION_CANDIDATES = 20000


@dataclass
class SynthConfig:
    n_labels: int = 24
    n_train: int = 2000
    n_test: int = 500
    cluster_count: int = 4
    rho_pos: float = 0.7  # raw intra-cluster inclusion probability
    rho_neg: float = 0.9  # cross-cluster exclusion strength
    noise: float = 0.3  # fraction of feature entries replaced by shrugs
    neutral_mass: float = 0.2
    kappa: float = 4.5
    embedding_dim: int = 16
    embedding_jitter: float = 0.25
    hard_label_fraction: float = 0.125  # share of labels with unreliable evidence
    annotated_count: int | None = None  # defaults to n_labels
    seed: int = 7

    def validate(self) -> None:
        if self.n_labels < 2:
            raise ValidationError(f"need at least 2 labels, got {self.n_labels}")
        if not (1 <= self.cluster_count <= self.n_labels):
            raise ValidationError(
                f"cluster_count must lie in [1, {self.n_labels}], got {self.cluster_count}"
            )
        if self.n_train < 1 or self.n_test < 1:
            raise ValidationError("n_train and n_test must be positive")
        for name in ("rho_pos", "rho_neg", "noise", "hard_label_fraction"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {value}")
        if self.rho_pos == 0.0:
            raise ValidationError("rho_pos must be positive")
        if not (0.0 < self.neutral_mass < 0.5):
            raise ValidationError(f"neutral_mass must lie in (0, 0.5), got {self.neutral_mass}")
        if not (0.0 < self.kappa <= self.n_labels):
            raise ValidationError(f"kappa must lie in (0, {self.n_labels}], got {self.kappa}")
        if self.embedding_dim < self.cluster_count:
            raise ValidationError("embedding_dim must be >= cluster_count")
        if self.annotated_count is not None and not (
            1 <= self.annotated_count <= self.n_train
        ):
            raise ValidationError("annotated_count must lie in [1, n_train]")


@dataclass
class SynthBundle:
    config: SynthConfig
    label_space: LabelSpace
    clusters: np.ndarray  # (L,) cluster id per label
    train_features: FeatureMatrix
    test_features: FeatureMatrix
    train_truth: GroundTruth
    test_truth: GroundTruth
    embeddings: LabelEmbeddings
    kappa: float  # exact mean train cardinality
    lambdas: np.ndarray  # exact train label frequencies
    annotations: dict[int, np.ndarray]

    def supervision(self, setting: str) -> SupervisionConfig:
        """The supervision statistics each setting is allowed to see."""
        if setting == SETTING_ANNOTATION_FREE:
            return SupervisionConfig(setting=setting, kappa=self.kappa, lambdas=self.lambdas.copy())
        if setting == SETTING_SCARCE:
            return SupervisionConfig(setting=setting, annotations=dict(self.annotations))
        if setting == SETTING_DOMAIN:
            return SupervisionConfig(
                setting=setting,
                kappa=self.kappa,
                lambdas=self.lambdas.copy(),
                annotations=dict(self.annotations),
            )
        raise ValidationError(f"unknown setting {setting!r}")


def _cluster_assignment(n_labels: int, cluster_count: int) -> np.ndarray:
    return (np.arange(n_labels) * cluster_count) // n_labels


def hard_label_set(n_labels: int, fraction: float) -> np.ndarray:
    """Evenly spaced label ids whose raw evidence is unreliable.

    Even spacing over the contiguous cluster layout puts roughly the same
    number of hard labels in every cluster, so each one keeps clean siblings
    to be recovered from.
    """
    count = int(round(fraction * n_labels))
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    return (np.arange(count) * n_labels) // count


def _inclusion_probabilities(config: SynthConfig, clusters: np.ndarray) -> np.ndarray:
    """Per home cluster the length-L inclusion probabilities, kappa-rescaled."""
    n_labels = config.n_labels
    probs = np.empty((config.cluster_count, n_labels))
    p_out_raw = config.rho_pos * (1.0 - config.rho_neg)
    for c in range(config.cluster_count):
        member = clusters == c
        raw = np.where(member, config.rho_pos, p_out_raw)
        expected = raw.sum()
        scale = config.kappa / expected
        scaled = raw * scale
        if scaled.max() > 1.0:
            raise ValidationError(
                f"kappa {config.kappa} is infeasible for cluster {c}: "
                f"rescaled inclusion probability exceeds 1"
            )
        probs[c] = scaled
    return probs


def _draw_truth(
    rng: np.random.Generator, config: SynthConfig, probs: np.ndarray, clusters: np.ndarray, n: int
) -> np.ndarray:
    truth = np.zeros((n, config.n_labels), dtype=np.uint8)
    homes = rng.integers(config.cluster_count, size=n)
    draws = rng.random((n, config.n_labels))
    for i in range(n):
        mask = draws[i] < probs[homes[i]]
        if not mask.any():
            members = np.flatnonzero(clusters == homes[i])
            mask[members[rng.integers(members.size)]] = True
        truth[i] = mask
    return truth


def _draw_features(
    rng: np.random.Generator, config: SynthConfig, truth: np.ndarray
) -> FeatureMatrix:
    n, n_labels = truth.shape
    nu = config.neutral_mass
    eps = rng.uniform(0.0, _CLEAN_JITTER, size=(n, n_labels))
    major = np.clip(1.0 - nu - eps, 0.0, 1.0)
    present = truth.astype(bool)

    # Hard labels are miscalibrated: present entries collapse to a coin
    # flip at rate r, absent entries flip to confident entailment-style
    # evidence at the rate that replaces the lost firing mass (half of the
    # collapsed mass, since a coin flip still fires half the time), so the
    # label fires at the correct frequency but on partly wrong samples.
    hard = hard_label_set(n_labels, config.hard_label_fraction)
    miss_rate = min(1.0, _HARD_RATE_SCALE * config.noise)
    flipped = np.zeros((n, n_labels), dtype=bool)
    if hard.size and miss_rate > 0.0:
        rates = truth[:, hard].mean(axis=0, dtype=np.float64)
        fake_rate = np.zeros(hard.size)
        np.divide(
            _HARD_SURPLUS * 0.5 * rates * miss_rate,
            1.0 - rates,
            out=fake_rate,
            where=rates < 1.0,
        )
        rate_per_entry = np.where(
            present[:, hard], miss_rate, np.minimum(fake_rate, 1.0)
        )
        flipped[:, hard] = rng.random((n, hard.size)) < rate_per_entry
    entailment_style = present ^ flipped

    q = np.where(entailment_style, major, eps)
    qbar = np.where(entailment_style, eps, major)
    qtilde = 1.0 - q - qbar

    collapsed = present & flipped
    collapse_count = int(collapsed.sum())
    if collapse_count:
        draws = rng.dirichlet(np.asarray(_COLLAPSE_ALPHA), size=collapse_count)
        q[collapsed] = draws[:, 0]
        qtilde[collapsed] = draws[:, 1]
        qbar[collapsed] = draws[:, 2]

    shrug = rng.random((n, n_labels)) < config.noise
    count = int(shrug.sum())
    if count:
        draws = rng.dirichlet(np.asarray(_SHRUG_ALPHA), size=count)
        q[shrug] = draws[:, 0]
        qtilde[shrug] = draws[:, 1]
        qbar[shrug] = draws[:, 2]

    data = np.stack([q, qtilde, qbar], axis=2).astype(np.float32)
    matrix = FeatureMatrix(data=data)
    matrix.validate()
    return matrix


def _draw_embeddings(rng: np.random.Generator, config: SynthConfig, clusters: np.ndarray) -> LabelEmbeddings:
    gauss = rng.normal(size=(config.embedding_dim, config.cluster_count))
    centroids, _ = np.linalg.qr(gauss)  # orthonormal columns
    jitter = rng.normal(size=(config.n_labels, config.embedding_dim))
    jitter *= config.embedding_jitter / np.sqrt(config.embedding_dim)
    vectors = centroids.T[clusters] + jitter
    emb = LabelEmbeddings(vectors=vectors.astype(np.float32))
    emb.validate()
    return emb


def _draw_annotated_ids(
    rng: np.random.Generator, truth: np.ndarray, count: int
) -> np.ndarray:
    """Pick ``count`` row ids whose label statistics mirror the population.

    The annotated subset doubles as the estimation basis in the
    scarce-annotation setting, so a badly skewed draw (labels missing
    entirely, cardinality off) makes that setting measure estimator luck
    rather than method behaviour.  Among uniform candidate draws, the one
    whose subset statistics deviate least from the population is kept:
    uncovered occurring labels weigh heaviest, then the worst per-label
    frequency deviation, then the cardinality deviation.
    """
    n, n_labels = truth.shape
    occurring = truth.any(axis=0)
    pop_lambdas = truth.mean(axis=0, dtype=np.float64)
    pop_kappa = truth.sum(axis=1, dtype=np.float64).mean()
    best_ids: np.ndarray | None = None
    best_score = np.inf
    for _ in range(_ANNOTATION_CANDIDATES):
        ids = rng.choice(n, size=count, replace=False)
        sub = truth[ids]
        uncovered = int((occurring & ~sub.any(axis=0)).sum())
        lam_dev = float(np.abs(sub.mean(axis=0, dtype=np.float64) - pop_lambdas).max())
        kap_dev = float(abs(sub.sum(dtype=np.float64) / count - pop_kappa))
        score = 10.0 * uncovered + 2.0 * lam_dev + kap_dev
        if score < best_score:
            best_score = score
            best_ids = ids
    assert best_ids is not None
    return np.sort(best_ids)


def generate(config: SynthConfig) -> SynthBundle:
    """Deterministically generate the full dataset bundle for a config."""
    config.validate()
    clusters = _cluster_assignment(config.n_labels, config.cluster_count)
    probs = _inclusion_probabilities(config, clusters)
    seed = config.seed

    train_truth = _draw_truth(stream(seed, _TRUTH_TRAIN_STREAM), config, probs, clusters, config.n_train)
    test_truth = _draw_truth(stream(seed, _TRUTH_TEST_STREAM), config, probs, clusters, config.n_test)
    train_features = _draw_features(stream(seed, _FEATURE_TRAIN_STREAM), config, train_truth)
    test_features = _draw_features(stream(seed, _FEATURE_TEST_STREAM), config, test_truth)
    embeddings = _draw_embeddings(stream(seed, _EMBEDDING_STREAM), config, clusters)

    kappa = float(train_truth.sum(axis=1, dtype=np.float64).mean())
    lambdas = train_truth.mean(axis=0, dtype=np.float64)

    annotated_count = config.annotated_count if config.annotated_count is not None else config.n_labels
    annotated_count = min(annotated_count, config.n_train)
    ids = _draw_annotated_ids(stream(seed, _ANNOTATION_STREAM), train_truth, annotated_count)
    annotations = {int(i): train_truth[int(i)].copy() for i in ids}

    label_space = LabelSpace(
        descriptions=tuple(
            f"topic {l:02d} of cluster {clusters[l]}" for l in range(config.n_labels)
        )
    )
    return SynthBundle(
        config=config,
        label_space=label_space,
        clusters=clusters,
        train_features=train_features,
        test_features=test_features,
        train_truth=GroundTruth(labels=train_truth),
        test_truth=GroundTruth(labels=test_truth),
        embeddings=embeddings,
        kappa=kappa,
        lambdas=lambdas,
        annotations=annotations,
    )


def quantize_label_frequencies(lambdas: np.ndarray, group_count: int) -> np.ndarray:
    """Replace each frequency by the mean of its equal-count rank group.

    Labels are ranked by decreasing frequency and split into ``group_count``
    contiguous rank groups (earlier groups take the remainder when the split
    is uneven).  Group means are preserved exactly.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.ndim != 1:
        raise ValidationError(f"lambdas must be 1-d, got shape {lam.shape}")
    if not (1 <= group_count <= lam.shape[0]):
        raise ValidationError(
            f"group_count must lie in [1, {lam.shape[0]}], got {group_count}"
        )
    order = np.argsort(-lam, kind="stable")
    out = np.empty_like(lam)
    for group in np.array_split(order, group_count):
        out[group] = lam[group].mean()
    return out


MANIFEST_BASENAMES = {
    SETTING_ANNOTATION_FREE: "manifest_annotation_free.json",
    SETTING_SCARCE: "manifest_scarce_annotation.json",
    SETTING_DOMAIN: "manifest_domain_supervisor.json",
}


def write_dataset(bundle: SynthBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write the interchange files plus one manifest per supervision setting.

    All three manifests reference the same binary files, so downstream runs
    differ only in what the manifest lets them see.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "train_features": "train_features.bin",
        "test_features": "test_features.bin",
        "test_labels": "test_labels.bin",
        "embeddings": "embeddings.bin",
    }
    save_features(bundle.train_features, out / files["train_features"])
    save_features(bundle.test_features, out / files["test_features"])
    save_ground_truth(bundle.test_truth, out / files["test_labels"])
    save_embeddings(bundle.embeddings, out / files["embeddings"])

    paths = {key: out / name for key, name in files.items()}
    for setting, basename in MANIFEST_BASENAMES.items():
        save_manifest(out / basename, bundle.label_space, bundle.supervision(setting), files)
        paths[setting] = out / basename
    return paths
