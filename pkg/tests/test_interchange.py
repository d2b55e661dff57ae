"""Binary envelope and manifest round-trips, plus the validation surface."""

import io

import numpy as np
import pytest

from bncl.interchange import (
    SETTING_ANNOTATION_FREE,
    SETTING_DOMAIN,
    SETTING_SCARCE,
    FeatureMatrix,
    GroundTruth,
    LabelEmbeddings,
    LabelSpace,
    SupervisionConfig,
    ValidationError,
    load_embeddings,
    load_features,
    load_ground_truth,
    load_manifest,
    peek_header,
    read_block,
    read_blocks,
    save_embeddings,
    save_features,
    save_ground_truth,
    save_manifest,
    write_block,
    write_blocks,
)


def test_block_round_trip_2d_and_3d(rng):
    buf = io.BytesIO()
    two_d = rng.random((3, 5)).astype(np.float32)
    three_d = rng.random((2, 4, 3)).astype(np.float32)
    write_block(buf, two_d)
    write_block(buf, three_d)
    buf.seek(0)
    first = read_block(buf)
    second = read_block(buf)
    assert read_block(buf) is None
    np.testing.assert_array_equal(first, two_d[:, :, None])
    np.testing.assert_array_equal(second, three_d)
    assert not first.flags.writeable


def test_block_rejects_bad_rank(rng):
    with pytest.raises(ValidationError):
        write_block(io.BytesIO(), rng.random(4).astype(np.float32))


def test_read_block_bad_magic():
    buf = io.BytesIO(b"NOPE" + bytes(13))
    with pytest.raises(ValidationError, match="magic"):
        read_block(buf)


def test_read_block_truncated_header():
    with pytest.raises(ValidationError, match="truncated"):
        read_block(io.BytesIO(b"BN"))


def test_read_block_truncated_payload(rng, tmp_path):
    path = tmp_path / "t.bin"
    write_blocks(path, [rng.random((4, 4)).astype(np.float32)])
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValidationError, match="payload"):
        read_blocks(path)


def test_peek_header_matches_content(rng, tmp_path):
    path = tmp_path / "t.bin"
    write_blocks(path, [rng.random((6, 2, 3)).astype(np.float32)])
    assert peek_header(path) == (6, 2, 3)


def test_feature_round_trip(rng, tmp_path):
    data = rng.dirichlet((1.0, 1.0, 1.0), size=(5, 4)).astype(np.float32)
    matrix = FeatureMatrix(data=data)
    path = tmp_path / "features.bin"
    save_features(matrix, path)
    loaded = load_features(path)
    np.testing.assert_array_equal(loaded.data, data)
    np.testing.assert_allclose(loaded.entailment, data[:, :, 0])
    np.testing.assert_allclose(loaded.contradiction, data[:, :, 2])


def test_feature_validation_rejects_bad_rows(rng):
    data = rng.dirichlet((1.0, 1.0, 1.0), size=(3, 2)).astype(np.float32)
    bad = data.copy()
    bad[1, 0, 0] = -0.01
    with pytest.raises(ValidationError, match="negative"):
        FeatureMatrix(data=bad).validate()
    bad = data.copy()
    bad[2, 1, 1] += 0.2
    with pytest.raises(ValidationError, match="sum to 1"):
        FeatureMatrix(data=bad).validate()
    with pytest.raises(ValidationError, match="shape"):
        FeatureMatrix(data=data[:, :, :2]).validate()


def test_embedding_round_trip_and_zero_row(rng, tmp_path):
    vectors = rng.normal(size=(4, 7)).astype(np.float32)
    path = tmp_path / "emb.bin"
    save_embeddings(LabelEmbeddings(vectors=vectors), path)
    loaded = load_embeddings(path)
    np.testing.assert_array_equal(loaded.vectors, vectors)
    vectors[2] = 0.0
    with pytest.raises(ValidationError, match="all-zero"):
        LabelEmbeddings(vectors=vectors).validate()


def test_ground_truth_round_trip_and_validation(tmp_path):
    labels = np.array([[1, 0, 1], [0, 1, 0]], dtype=np.uint8)
    path = tmp_path / "labels.bin"
    save_ground_truth(GroundTruth(labels=labels), path)
    np.testing.assert_array_equal(load_ground_truth(path).labels, labels)
    with pytest.raises(ValidationError, match="no positive"):
        GroundTruth(labels=np.array([[1, 0], [0, 0]], dtype=np.uint8)).validate()
    with pytest.raises(ValidationError, match="0 or 1"):
        GroundTruth(labels=np.array([[2, 0]], dtype=np.uint8)).validate()


def _setting_cases():
    lam = np.full(3, 0.5)
    ann = {0: np.array([1, 0, 1], dtype=np.uint8)}
    yield SupervisionConfig(setting=SETTING_ANNOTATION_FREE, kappa=1.0, lambdas=lam), True
    yield SupervisionConfig(setting=SETTING_ANNOTATION_FREE, kappa=1.0), False
    yield SupervisionConfig(setting=SETTING_ANNOTATION_FREE, lambdas=lam), False
    yield SupervisionConfig(setting=SETTING_ANNOTATION_FREE, kappa=1.0, lambdas=lam,
                            annotations=ann), False
    yield SupervisionConfig(setting=SETTING_SCARCE, annotations=ann), True
    yield SupervisionConfig(setting=SETTING_SCARCE), False
    yield SupervisionConfig(setting=SETTING_DOMAIN, kappa=1.0, lambdas=lam,
                            annotations=ann), True
    yield SupervisionConfig(setting=SETTING_DOMAIN, kappa=1.0, lambdas=lam), False
    yield SupervisionConfig(setting=SETTING_DOMAIN, annotations=ann), False
    yield SupervisionConfig(setting="mystery"), False


def test_supervision_setting_requirements():
    """Each setting demands exactly its own statistics, nothing else."""
    for config, ok in _setting_cases():
        if ok:
            config.validate(3)
        else:
            with pytest.raises(ValidationError):
                config.validate(3)


def test_supervision_annotation_checks():
    base = dict(setting=SETTING_SCARCE)
    with pytest.raises(ValidationError, match="length"):
        SupervisionConfig(**base, annotations={0: np.ones(2, dtype=np.uint8)}).validate(3)
    with pytest.raises(ValidationError, match="binary"):
        SupervisionConfig(**base, annotations={0: np.array([2, 0, 0])}).validate(3)
    with pytest.raises(ValidationError, match="no positive"):
        SupervisionConfig(**base, annotations={0: np.zeros(3, dtype=np.uint8)}).validate(3)
    with pytest.raises(ValidationError, match="out of range"):
        SupervisionConfig(
            **base, annotations={5: np.array([1, 0, 0], dtype=np.uint8)}
        ).validate(3, n_train=4)


def test_manifest_round_trip(rng, tmp_path):
    labels = LabelSpace(descriptions=("alpha topic", "beta topic", "gamma topic"))
    features = FeatureMatrix(
        data=rng.dirichlet((1.0, 1.0, 1.0), size=(6, 3)).astype(np.float32)
    )
    save_features(features, tmp_path / "train.bin")
    supervision = SupervisionConfig(
        setting=SETTING_DOMAIN,
        kappa=1.5,
        lambdas=np.array([0.5, 0.25, 0.75]),
        annotations={2: np.array([1, 0, 1], dtype=np.uint8)},
    )
    save_manifest(
        tmp_path / "manifest.json", labels, supervision, {"train_features": "train.bin"}
    )
    loaded = load_manifest(tmp_path / "manifest.json")
    assert loaded.label_space.descriptions == labels.descriptions
    assert loaded.supervision.setting == SETTING_DOMAIN
    assert loaded.supervision.kappa == pytest.approx(1.5)
    np.testing.assert_allclose(loaded.supervision.lambdas, [0.5, 0.25, 0.75])
    np.testing.assert_array_equal(loaded.supervision.annotations[2], [1, 0, 1])
    assert loaded.train_features == tmp_path / "train.bin"
    assert loaded.test_features is None


def test_manifest_rejects_label_count_mismatch(rng, tmp_path):
    labels = LabelSpace(descriptions=("one", "two"))
    features = FeatureMatrix(
        data=rng.dirichlet((1.0, 1.0, 1.0), size=(4, 3)).astype(np.float32)
    )
    save_features(features, tmp_path / "train.bin")
    supervision = SupervisionConfig(
        setting=SETTING_ANNOTATION_FREE, kappa=1.0, lambdas=np.array([0.5, 0.5])
    )
    save_manifest(
        tmp_path / "manifest.json", labels, supervision, {"train_features": "train.bin"}
    )
    with pytest.raises(ValidationError, match="labels"):
        load_manifest(tmp_path / "manifest.json")


def test_manifest_rejects_bad_json(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValidationError, match="JSON object"):
        load_manifest(path)
    path.write_text("{nope", encoding="utf-8")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_manifest(path)
