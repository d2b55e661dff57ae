import gzip
import logging

import numpy as np
import pytest

from nliextract.config import ExtractionError
from nliextract.embeddings import (
    average_label_embeddings,
    label_vocabulary,
    read_word_vectors,
)


def test_read_word_vectors_exact_values(glove_path, glove_lines):
    table = read_word_vectors(glove_path)
    assert len(table) == len(glove_lines)
    for line in glove_lines:
        parts = line.split(" ")
        expected = np.array(parts[1:], dtype=np.float32)
        assert table[parts[0]].dtype == np.float32
        np.testing.assert_array_equal(table[parts[0]], expected)


def test_read_word_vectors_vocabulary_filter(glove_path):
    table = read_word_vectors(glove_path, vocabulary={"ethics", "logic", "unseen"})
    assert sorted(table) == ["ethics", "logic"]


def test_read_word_vectors_duplicate_token_first_wins(tmp_path):
    path = tmp_path / "dup.txt"
    path.write_text("dup 1.0 0.0 0.0 0.0\ndup 2.0 0.0 0.0 0.0\n", encoding="utf-8")
    table = read_word_vectors(path)
    np.testing.assert_array_equal(table["dup"], np.array([1, 0, 0, 0], dtype=np.float32))


def test_read_word_vectors_spaced_token(tmp_path):
    path = tmp_path / "spaced.txt"
    path.write_text("plain 1.0 2.0 3.0 4.0\n. . . 0.1 0.2 0.3 0.4\n", encoding="utf-8")
    table = read_word_vectors(path)
    np.testing.assert_allclose(table[". . ."], [0.1, 0.2, 0.3, 0.4], rtol=0, atol=1e-7)


def test_read_word_vectors_gzip(tmp_path, glove_path, glove_lines):
    gz_path = tmp_path / "vectors.txt.gz"
    with gzip.open(gz_path, "wt", encoding="utf-8") as fh:
        fh.write("\n".join(glove_lines) + "\n")
    plain = read_word_vectors(glove_path)
    zipped = read_word_vectors(gz_path)
    assert sorted(plain) == sorted(zipped)
    for token, vector in plain.items():
        np.testing.assert_array_equal(vector, zipped[token])


def test_read_word_vectors_short_line_rejected(tmp_path):
    path = tmp_path / "short.txt"
    path.write_text("good 1.0 2.0 3.0 4.0\nbad 1.0 2.0\n", encoding="utf-8")
    with pytest.raises(ExtractionError, match=r"short\.txt:2: expected 4 vector components, got 2"):
        read_word_vectors(path)


def test_read_word_vectors_non_numeric_rejected(tmp_path):
    path = tmp_path / "nonnum.txt"
    path.write_text("good 1.0 2.0 3.0 4.0\nbad 1.0 2.0 oops 4.0\n", encoding="utf-8")
    with pytest.raises(ExtractionError, match=r"nonnum\.txt:2: non-numeric"):
        read_word_vectors(path)


def test_read_word_vectors_bare_token_rejected(tmp_path):
    path = tmp_path / "bare.txt"
    path.write_text("solo\n", encoding="utf-8")
    with pytest.raises(ExtractionError, match=r"bare\.txt:1: not a token-vector line"):
        read_word_vectors(path)


def test_read_word_vectors_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ExtractionError, match="empty word-vector file"):
        read_word_vectors(path)


def test_label_vocabulary_splits_hyphens():
    vocab = label_vocabulary(["philosophy-of-mind", "Ethics"])
    assert vocab == {"philosophy", "of", "mind", "ethics"}


def test_single_token_label_is_exact_vector(glove_path):
    table = read_word_vectors(glove_path)
    vectors = average_label_embeddings(["ethics"], table)
    assert vectors.shape == (1, 4)
    assert vectors.dtype == np.float32
    np.testing.assert_array_equal(vectors[0], table["ethics"])


def test_multi_token_label_is_token_mean(glove_path):
    table = read_word_vectors(glove_path)
    vectors = average_label_embeddings(["moral philosophy"], table)
    np.testing.assert_allclose(vectors[0], [0.45, -0.05, 0.20, 0.05], rtol=0, atol=1e-6)


def test_partial_oov_label_averages_known_tokens(glove_path, caplog):
    table = read_word_vectors(glove_path)
    with caplog.at_level(logging.INFO, logger="nliextract.embeddings"):
        vectors = average_label_embeddings(["ethics zorbulon"], table)
    np.testing.assert_array_equal(vectors[0], table["ethics"])
    assert "skipped 1 out-of-vocabulary" in caplog.text


def test_all_oov_labels_reported_together(glove_path):
    table = read_word_vectors(glove_path)
    with pytest.raises(ExtractionError) as excinfo:
        average_label_embeddings(["ethics", "zorbulon", "mind", "vexwhistle glonk"], table)
    message = str(excinfo.value)
    assert "'zorbulon' (index 1)" in message
    assert "'vexwhistle glonk' (index 3)" in message
    assert "ethics" not in message


def test_no_descriptions_rejected(glove_path):
    table = read_word_vectors(glove_path)
    with pytest.raises(ExtractionError, match="no label descriptions"):
        average_label_embeddings([], table)
