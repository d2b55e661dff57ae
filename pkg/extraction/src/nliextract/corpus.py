"""Corpus loaders: JSON lines, Reuters-21578 SGML, Stack Exchange Posts.xml.

Every loader produces the same shape: an ordered label universe (raw keys
plus human-readable descriptions) and train/test lists of samples, each a
premise text with at least one label.  Documents without labels or without
text are dropped, because downstream both the ground-truth format and the
supervision statistics require non-empty label sets.

Whether the premise is the title plus the body or the body alone is a
loader option (``include_title``); the corpora do not fix this themselves.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from xml.etree import ElementTree

import numpy as np

from .config import CORPUS_FORMATS, ExtractionError

logger = logging.getLogger(__name__)

_CONTROL = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f]")
_SPACE = re.compile(r"\s+")
_SEPARATORS = re.compile(r"[-_]+")
_TAG_GROUP = re.compile(r"<([^<>]+)>")


def _clean_text(text: str) -> str:
    return _SPACE.sub(" ", _CONTROL.sub(" ", text)).strip()


def describe(key: str) -> str:
    """Human-readable label description for a raw topic or tag key."""
    text = _SEPARATORS.sub(" ", key).strip()
    return text or key


@dataclass(frozen=True)
class Sample:
    text: str
    labels: tuple[str, ...]


@dataclass
class Corpus:
    """Label universe plus train and test samples.

    ``label_keys`` are the raw corpus identifiers (topic codes, tag slugs)
    used for matching; ``descriptions`` are the aligned human-readable forms
    that become hypothesis material and manifest labels.
    """

    label_keys: tuple[str, ...]
    descriptions: tuple[str, ...]
    train: list[Sample]
    test: list[Sample]

    @property
    def n_labels(self) -> int:
        return len(self.label_keys)

    def label_matrix(self, split: str) -> np.ndarray:
        if split not in ("train", "test"):
            raise ExtractionError(f"unknown split {split!r}")
        samples = self.train if split == "train" else self.test
        index = {key: i for i, key in enumerate(self.label_keys)}
        matrix = np.zeros((len(samples), self.n_labels), dtype=np.uint8)
        for row, sample in enumerate(samples):
            for key in sample.labels:
                matrix[row, index[key]] = 1
        return matrix


def train_statistics(corpus: Corpus) -> tuple[float, np.ndarray]:
    """Average subset cardinality and per-label observation probabilities."""
    matrix = corpus.label_matrix("train")
    if matrix.shape[0] == 0:
        raise ExtractionError("corpus has no training samples")
    kappa = float(matrix.sum(axis=1, dtype=np.float64).mean())
    lambdas = matrix.mean(axis=0, dtype=np.float64)
    return kappa, lambdas


def select_annotations(
    corpus: Corpus, count: int | None = None, seed: int = 0
) -> dict[int, np.ndarray]:
    """Pick a small annotated subset of the training split, seeded.

    ``count`` defaults to the number of labels.  When the training split is
    smaller than that, every sample is annotated.
    """
    matrix = corpus.label_matrix("train")
    n_train = matrix.shape[0]
    want = corpus.n_labels if count is None else count
    if want < 1:
        raise ExtractionError(f"annotation count must be positive, got {want}")
    take = min(want, n_train)
    rng = np.random.default_rng(seed)
    ids = np.sort(rng.choice(n_train, size=take, replace=False))
    return {int(i): matrix[int(i)] for i in ids}


# ---------------------------------------------------------------------------
# JSON lines


def load_jsonl(path: str | Path) -> Corpus:
    """One JSON object per line: ``{"text", "labels", "split"}``."""
    path = Path(path)
    train: list[Sample] = []
    test: list[Sample] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExtractionError(f"{path}:{lineno}: not valid JSON ({exc})")
            if not isinstance(row, dict):
                raise ExtractionError(f"{path}:{lineno}: each line must be a JSON object")
            for key in ("text", "labels", "split"):
                if key not in row:
                    raise ExtractionError(f"{path}:{lineno}: missing field {key!r}")
            text = row["text"]
            if not isinstance(text, str) or not text.strip():
                raise ExtractionError(f"{path}:{lineno}: empty text")
            labels = row["labels"]
            if not isinstance(labels, list) or not labels:
                raise ExtractionError(f"{path}:{lineno}: needs at least one label")
            split = row["split"]
            if split not in ("train", "test"):
                raise ExtractionError(f"{path}:{lineno}: split must be train or test, got {split!r}")
            sample = Sample(
                text=_clean_text(text),
                labels=tuple(dict.fromkeys(str(label) for label in labels)),
            )
            seen.update(sample.labels)
            (train if split == "train" else test).append(sample)
    if not train:
        raise ExtractionError(f"{path}: no training samples")
    universe = tuple(sorted(seen))
    return Corpus(label_keys=universe, descriptions=universe, train=train, test=test)


# ---------------------------------------------------------------------------
# Reuters-21578 SGML


class _ReutersParser(HTMLParser):
    """Collects per-document split attributes, topics, title and body.

    The D item tag is shared by several list fields (topics, places,
    people), so items only count as topics while inside the TOPICS element.
    Stray character data directly inside TEXT is kept as a fallback body for
    the unprocessed document types.
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.docs: list[dict] = []
        self._reset()

    def _reset(self) -> None:
        self._attrs: dict[str, str] = {}
        self._topics: list[str] = []
        self._topic_parts: list[str] = []
        self._title: list[str] = []
        self._body: list[str] = []
        self._raw: list[str] = []
        self._in_topics = False
        self._in_item = False
        self._in_text = False
        self._field: str | None = None

    def handle_starttag(self, tag, attrs):
        if tag == "reuters":
            self._reset()
            self._attrs = {name.lower(): (value or "") for name, value in attrs}
        elif tag == "topics":
            self._in_topics = True
        elif tag == "d":
            if self._in_topics:
                self._in_item = True
                self._topic_parts = []
        elif tag == "text":
            self._in_text = True
        elif tag in ("title", "body", "dateline"):
            self._field = tag

    def handle_endtag(self, tag):
        if tag == "reuters":
            self.docs.append(
                {
                    "split": self._attrs.get("lewissplit", "").upper(),
                    "topics_attr": self._attrs.get("topics", "").upper() == "YES",
                    "topics": tuple(dict.fromkeys(self._topics)),
                    "title": _clean_text(" ".join(self._title)),
                    "body": _clean_text(" ".join(self._body)),
                    "raw": _clean_text(" ".join(self._raw)),
                }
            )
        elif tag == "topics":
            self._in_topics = False
        elif tag == "d":
            if self._in_item:
                topic = "".join(self._topic_parts).strip()
                if topic:
                    self._topics.append(topic)
                self._in_item = False
        elif tag == "text":
            self._in_text = False
        elif tag in ("title", "body", "dateline"):
            self._field = None

    def handle_data(self, data):
        if self._in_item:
            self._topic_parts.append(data)
        elif self._field == "title":
            self._title.append(data)
        elif self._field == "body":
            self._body.append(data)
        elif self._field is None and self._in_text:
            self._raw.append(data)


TOPICS_FILENAME = "all-topics-strings.lc.txt"


def load_reuters(directory: str | Path, include_title: bool = True) -> Corpus:
    """Load the SGML distribution using the LEWISSPLIT train/test partition.

    Documents enter a split when their TOPICS attribute is YES, they carry
    at least one topic from the label universe, and their premise text is
    non-empty.  The label universe comes from the distribution's category
    list file when present (observed topics otherwise), so unused categories
    still get a label index.
    """
    directory = Path(directory)
    sgml_files = sorted(directory.glob("*.sgm"))
    if not sgml_files:
        raise ExtractionError(f"{directory}: no .sgm files found")
    parser = _ReutersParser()
    for sgml_file in sgml_files:
        # latin-1 never fails to decode; one distribution file has a stray
        # non-ascii byte that would kill a utf-8 read
        parser.feed(sgml_file.read_text(encoding="latin-1"))
    parser.close()

    topics_file = directory / TOPICS_FILENAME
    if topics_file.exists():
        universe = tuple(
            line.strip()
            for line in topics_file.read_text(encoding="latin-1").splitlines()
            if line.strip()
        )
    else:
        universe = tuple(sorted({topic for doc in parser.docs for topic in doc["topics"]}))
    known = set(universe)

    train: list[Sample] = []
    test: list[Sample] = []
    unknown_topics = 0
    for doc in parser.docs:
        if not doc["topics_attr"]:
            continue
        if doc["split"] == "TRAIN":
            bucket = train
        elif doc["split"] == "TEST":
            bucket = test
        else:
            continue
        topics = tuple(topic for topic in doc["topics"] if topic in known)
        unknown_topics += len(doc["topics"]) - len(topics)
        body = doc["body"] or doc["raw"]
        text = f"{doc['title']} {body}".strip() if include_title else body
        if not topics or not text:
            continue
        bucket.append(Sample(text=text, labels=topics))
    if unknown_topics:
        logger.info("dropped %d topic assignments outside the category list", unknown_topics)
    if not train:
        raise ExtractionError(f"{directory}: no training documents with topics")
    return Corpus(
        label_keys=universe,
        descriptions=tuple(describe(key) for key in universe),
        train=train,
        test=test,
    )


# ---------------------------------------------------------------------------
# Stack Exchange Posts.xml


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []

    def handle_data(self, data):
        self.parts.append(data)


def _strip_html(markup: str) -> str:
    extractor = _TextExtractor()
    extractor.feed(markup)
    extractor.close()
    return _clean_text(" ".join(extractor.parts))


def _parse_tag_list(raw: str) -> list[str]:
    # older dumps write <tag-a><tag-b>, newer ones |tag-a|tag-b|
    if "<" in raw:
        return _TAG_GROUP.findall(raw)
    return [tag for tag in raw.split("|") if tag]


def load_stackexchange(
    posts_path: str | Path, include_title: bool = True, train_fraction: float = 0.8
) -> Corpus:
    """Load questions from a Posts.xml dump and split them by post id order.

    Questions are rows with PostTypeId 1; their tags become the labels and
    the HTML body is flattened to text.  There is no native train/test
    partition, so the first ``train_fraction`` of questions in id order form
    the training split, which is deterministic for a fixed dump.
    """
    posts_path = Path(posts_path)
    rows: list[tuple[int, str, tuple[str, ...]]] = []
    try:
        for _event, element in ElementTree.iterparse(str(posts_path), events=("end",)):
            if element.tag != "row":
                continue
            if element.get("PostTypeId") == "1":
                tags = tuple(dict.fromkeys(_parse_tag_list(element.get("Tags") or "")))
                title = element.get("Title") or ""
                body = _strip_html(element.get("Body") or "")
                text = _clean_text(f"{title} {body}" if include_title else body)
                if tags and text:
                    try:
                        post_id = int(element.get("Id") or "")
                    except ValueError:
                        raise ExtractionError(f"{posts_path}: row without an integer Id")
                    rows.append((post_id, text, tags))
            element.clear()
    except ElementTree.ParseError as exc:
        raise ExtractionError(f"{posts_path}: not well-formed XML ({exc})")
    if not rows:
        raise ExtractionError(f"{posts_path}: no tagged questions found")
    rows.sort(key=lambda row: row[0])
    n_train = int(len(rows) * train_fraction)
    if n_train < 1 or n_train >= len(rows):
        raise ExtractionError(
            f"train fraction {train_fraction} leaves an empty split for {len(rows)} questions"
        )
    universe = tuple(sorted({tag for _, _, tags in rows for tag in tags}))
    samples = [Sample(text=text, labels=tags) for _, text, tags in rows]
    return Corpus(
        label_keys=universe,
        descriptions=tuple(describe(key) for key in universe),
        train=samples[:n_train],
        test=samples[n_train:],
    )


# ---------------------------------------------------------------------------


def load_corpus(
    path: str | Path,
    corpus_format: str,
    include_title: bool = True,
    train_fraction: float = 0.8,
) -> Corpus:
    if corpus_format == "jsonl":
        return load_jsonl(path)
    if corpus_format == "reuters":
        return load_reuters(path, include_title=include_title)
    if corpus_format == "stackexchange":
        return load_stackexchange(
            path, include_title=include_title, train_fraction=train_fraction
        )
    raise ExtractionError(
        f"unknown corpus format {corpus_format!r}, expected one of {', '.join(CORPUS_FORMATS)}"
    )
