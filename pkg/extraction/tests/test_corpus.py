import logging
import shutil

import numpy as np
import pytest

from nliextract.config import ExtractionError
from nliextract.corpus import (
    Corpus,
    Sample,
    describe,
    load_corpus,
    load_jsonl,
    load_reuters,
    load_stackexchange,
    select_annotations,
    train_statistics,
)

JSONL_TRAIN_MATRIX = np.array(
    [
        [1, 0, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1],
        [0, 1, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1],
        [0, 0, 0, 1, 0],
        [0, 0, 0, 1, 0],
        [1, 0, 0, 0, 0],
        [1, 1, 0, 0, 0],
    ],
    dtype=np.uint8,
)

JSONL_TEST_MATRIX = np.array(
    [
        [0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1],
        [1, 1, 0, 0, 0],
        [0, 0, 0, 1, 0],
    ],
    dtype=np.uint8,
)


def test_describe_prettifies_separators():
    assert describe("money-fx") == "money fx"
    assert describe("philosophy-of-mind") == "philosophy of mind"
    assert describe("machine_learning") == "machine learning"
    assert describe("ethics") == "ethics"


# ---------------------------------------------------------------------------
# JSON lines


def test_jsonl_splits_and_universe(jsonl_corpus_path):
    corpus = load_jsonl(jsonl_corpus_path)
    assert corpus.label_keys == ("ethics", "kant", "logic", "mind", "skepticism")
    assert corpus.descriptions == corpus.label_keys
    assert len(corpus.train) == 12
    assert len(corpus.test) == 4
    assert corpus.train[0].text == "The ethics of war and moral duty in conflict"
    assert corpus.train[1].labels == ("ethics", "kant")


def test_jsonl_label_matrices(jsonl_corpus_path):
    corpus = load_jsonl(jsonl_corpus_path)
    np.testing.assert_array_equal(corpus.label_matrix("train"), JSONL_TRAIN_MATRIX)
    np.testing.assert_array_equal(corpus.label_matrix("test"), JSONL_TEST_MATRIX)
    with pytest.raises(ExtractionError, match="unknown split"):
        corpus.label_matrix("validation")


def test_jsonl_deduplicates_labels(tmp_path):
    path = tmp_path / "dup.jsonl"
    path.write_text(
        '{"text": "a b c", "labels": ["x", "x", "y"], "split": "train"}\n',
        encoding="utf-8",
    )
    corpus = load_jsonl(path)
    assert corpus.train[0].labels == ("x", "y")


@pytest.mark.parametrize(
    "line, message",
    [
        ('{"labels": ["x"], "split": "train"}', "missing field 'text'"),
        ('{"text": "  ", "labels": ["x"], "split": "train"}', "empty text"),
        ('{"text": "a", "labels": [], "split": "train"}', "needs at least one label"),
        ('{"text": "a", "labels": ["x"], "split": "dev"}', "split must be train or test"),
        ("[1, 2]", "must be a JSON object"),
        ("{not json", "not valid JSON"),
    ],
)
def test_jsonl_line_errors_carry_line_numbers(tmp_path, line, message):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"text": "fine", "labels": ["x"], "split": "train"}\n' + line + "\n",
        encoding="utf-8",
    )
    with pytest.raises(ExtractionError, match="bad.jsonl:2"):
        load_jsonl(path)
    with pytest.raises(ExtractionError, match=message):
        load_jsonl(path)


def test_jsonl_requires_training_samples(tmp_path):
    path = tmp_path / "testonly.jsonl"
    path.write_text('{"text": "a", "labels": ["x"], "split": "test"}\n', encoding="utf-8")
    with pytest.raises(ExtractionError, match="no training samples"):
        load_jsonl(path)


# ---------------------------------------------------------------------------
# Supervision statistics


def test_train_statistics_hand_computed(jsonl_corpus_path):
    corpus = load_jsonl(jsonl_corpus_path)
    kappa, lambdas = train_statistics(corpus)
    assert kappa == pytest.approx(14.0 / 12.0)
    np.testing.assert_allclose(lambdas, np.array([5, 3, 2, 2, 2]) / 12.0, rtol=0, atol=1e-15)


def test_train_statistics_needs_training_split():
    corpus = Corpus(
        label_keys=("a",), descriptions=("a",), train=[], test=[Sample("t", ("a",))]
    )
    with pytest.raises(ExtractionError, match="no training samples"):
        train_statistics(corpus)


def test_select_annotations_seeded(jsonl_corpus_path):
    corpus = load_jsonl(jsonl_corpus_path)
    first = select_annotations(corpus, seed=7)
    second = select_annotations(corpus, seed=7)
    assert list(first) == list(second)
    assert len(first) == corpus.n_labels
    matrix = corpus.label_matrix("train")
    ids = list(first)
    assert ids == sorted(ids)
    for sample_id, row in first.items():
        assert 0 <= sample_id < len(corpus.train)
        np.testing.assert_array_equal(row, matrix[sample_id])
        np.testing.assert_array_equal(row, second[sample_id])


def test_select_annotations_capped_at_train_size(jsonl_corpus_path):
    corpus = load_jsonl(jsonl_corpus_path)
    everything = select_annotations(corpus, count=50)
    assert list(everything) == list(range(len(corpus.train)))
    with pytest.raises(ExtractionError, match="must be positive"):
        select_annotations(corpus, count=0)


# ---------------------------------------------------------------------------
# Reuters SGML


def test_reuters_universe_comes_from_category_file(reuters_dir):
    corpus = load_reuters(reuters_dir)
    assert corpus.label_keys == ("corn", "grain", "money-fx", "ship", "wheat")
    assert corpus.descriptions == ("corn", "grain", "money fx", "ship", "wheat")


def test_reuters_split_membership(reuters_dir, caplog):
    with caplog.at_level(logging.INFO, logger="nliextract.corpus"):
        corpus = load_reuters(reuters_dir)
    assert len(corpus.train) == 2
    assert len(corpus.test) == 1
    assert corpus.train[0].labels == ("grain", "wheat")
    assert corpus.train[1].labels == ("money-fx",)
    assert corpus.test[0].labels == ("wheat",)
    assert "dropped 1 topic assignments outside the category list" in caplog.text


def test_reuters_text_assembly(reuters_dir):
    corpus = load_reuters(reuters_dir)
    assert corpus.train[0].text == (
        "GRAIN SHIPMENTS SET RECORD "
        "Wheat and corn shipments rose sharply this season. Reuter"
    )
    assert corpus.train[1].text == "DOLLAR RISES AGAINST YEN"
    assert corpus.test[0].text == (
        "WHEAT PRICES <UP> SHARPLY "
        "Prices rose as exports increased more than 10 pct. Reuter"
    )


def test_reuters_places_do_not_become_topics(reuters_dir):
    corpus = load_reuters(reuters_dir)
    for sample in corpus.train + corpus.test:
        assert "usa" not in sample.labels
        assert "canada" not in sample.labels


def test_reuters_body_only_drops_title_only_briefs(reuters_dir):
    corpus = load_reuters(reuters_dir, include_title=False)
    assert len(corpus.train) == 1
    assert corpus.train[0].text == "Wheat and corn shipments rose sharply this season. Reuter"


def test_reuters_observed_universe_without_category_file(reuters_dir, tmp_path):
    bare = tmp_path / "bare"
    bare.mkdir()
    for sgml in sorted(reuters_dir.glob("*.sgm")):
        shutil.copy(sgml, bare / sgml.name)
    corpus = load_reuters(bare)
    assert corpus.label_keys == ("grain", "money-fx", "mystery-topic", "wheat")
    assert corpus.test[1].labels == ("mystery-topic",)


def test_reuters_requires_sgml_files(tmp_path):
    with pytest.raises(ExtractionError, match="no .sgm files found"):
        load_reuters(tmp_path)


def test_reuters_requires_training_documents(tmp_path):
    sgml = tmp_path / "reut2-000.sgm"
    sgml.write_text(
        '<REUTERS TOPICS="YES" LEWISSPLIT="TRAIN" NEWID="1">\n'
        "<TOPICS></TOPICS>\n"
        "<TEXT><TITLE>EMPTY</TITLE><BODY>No topics.</BODY></TEXT>\n"
        "</REUTERS>\n",
        encoding="latin-1",
    )
    with pytest.raises(ExtractionError, match="no training documents with topics"):
        load_reuters(tmp_path)


# ---------------------------------------------------------------------------
# Stack Exchange Posts.xml


def test_stackexchange_angle_tags(posts_xml_path):
    corpus = load_stackexchange(posts_xml_path)
    assert corpus.label_keys == (
        "ethics", "kant", "logic", "philosophy-of-mind", "skepticism"
    )
    assert corpus.descriptions[3] == "philosophy of mind"
    assert len(corpus.train) == 4
    assert len(corpus.test) == 2
    assert corpus.train[0].text == "Is lying always wrong? A question about the ethics of lying."
    assert corpus.train[0].labels == ("ethics", "kant")
    assert corpus.train[1].text == "Brain in a vat Radical skepticism scenario."
    assert corpus.test[0].labels == ("philosophy-of-mind",)
    assert corpus.test[1].labels == ("logic",)


def test_stackexchange_pipe_tags_match_angle(posts_xml_path, posts_xml_pipes_path):
    angle = load_stackexchange(posts_xml_path)
    pipes = load_stackexchange(posts_xml_pipes_path)
    assert angle.label_keys == pipes.label_keys
    assert angle.train == pipes.train
    assert angle.test == pipes.test


def test_stackexchange_strips_html(posts_xml_path):
    corpus = load_stackexchange(posts_xml_path)
    for sample in corpus.train + corpus.test:
        assert "<p>" not in sample.text
        assert "</em>" not in sample.text


def test_stackexchange_body_only(posts_xml_path):
    corpus = load_stackexchange(posts_xml_path, include_title=False)
    assert corpus.train[0].text == "A question about the ethics of lying."


def test_stackexchange_split_is_id_ordered(posts_xml_path):
    corpus = load_stackexchange(posts_xml_path, train_fraction=0.5)
    assert len(corpus.train) == 3
    assert len(corpus.test) == 3
    assert corpus.train[2].text.startswith("What is modal logic?")


def test_stackexchange_rejects_empty_split(posts_xml_path):
    with pytest.raises(ExtractionError, match="leaves an empty split"):
        load_stackexchange(posts_xml_path, train_fraction=1.0)
    with pytest.raises(ExtractionError, match="leaves an empty split"):
        load_stackexchange(posts_xml_path, train_fraction=0.05)


def test_stackexchange_rejects_malformed_xml(tmp_path):
    path = tmp_path / "Posts.xml"
    path.write_text("<posts><row Id=1 ></posts>", encoding="utf-8")
    with pytest.raises(ExtractionError, match="not well-formed XML"):
        load_stackexchange(path)


def test_stackexchange_requires_integer_ids(tmp_path):
    path = tmp_path / "Posts.xml"
    path.write_text(
        '<posts><row Id="abc" PostTypeId="1" Title="T" Body="B" Tags="&lt;x&gt;" /></posts>',
        encoding="utf-8",
    )
    with pytest.raises(ExtractionError, match="integer Id"):
        load_stackexchange(path)


def test_stackexchange_requires_tagged_questions(tmp_path):
    path = tmp_path / "Posts.xml"
    path.write_text(
        '<posts><row Id="2" PostTypeId="2" Body="An answer." /></posts>',
        encoding="utf-8",
    )
    with pytest.raises(ExtractionError, match="no tagged questions"):
        load_stackexchange(path)


# ---------------------------------------------------------------------------
# Dispatch


def test_load_corpus_dispatch(jsonl_corpus_path, reuters_dir, posts_xml_path):
    assert load_corpus(jsonl_corpus_path, "jsonl").n_labels == 5
    assert load_corpus(reuters_dir, "reuters").n_labels == 5
    assert load_corpus(posts_xml_path, "stackexchange").n_labels == 5


def test_load_corpus_unknown_format(jsonl_corpus_path):
    with pytest.raises(ExtractionError, match="jsonl, reuters, stackexchange"):
        load_corpus(jsonl_corpus_path, "csv")
