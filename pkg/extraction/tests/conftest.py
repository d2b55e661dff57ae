"""Shared fixtures: tiny corpora in all three supported formats."""

import json

import pytest

# 12 train and 4 test samples over 5 labels.  Train row 10 is the only text
# longer than 128 tokens, so default extraction truncates exactly one
# premise.  Sorted label universe: ethics, kant, logic, mind, skepticism.
JSONL_ROWS = [
    {"text": "The ethics of war and moral duty in conflict", "labels": ["ethics"], "split": "train"},
    {"text": "Kant argued that moral law binds all rational beings", "labels": ["ethics", "kant"], "split": "train"},
    {"text": "Formal logic and the structure of valid arguments", "labels": ["logic"], "split": "train"},
    {"text": "Skepticism doubts whether knowledge is possible at all", "labels": ["skepticism"], "split": "train"},
    {"text": "Kant wrote three critiques about reason and judgement", "labels": ["kant"], "split": "train"},
    {"text": "Is lying ever permissible? A question of ethics", "labels": ["ethics"], "split": "train"},
    {"text": "Modal logic extends propositional logic with necessity", "labels": ["logic"], "split": "train"},
    {"text": "Radical skepticism and the brain in a vat problem", "labels": ["skepticism"], "split": "train"},
    {"text": "Mind and body interaction in dualist philosophy", "labels": ["mind"], "split": "train"},
    {"text": "Consciousness and the hard problem of mind", "labels": ["mind"], "split": "train"},
    {"text": "Virtue ethics from Aristotle to modern readings " + "word " * 140, "labels": ["ethics"], "split": "train"},
    {"text": "Kant on duty versus consequence in ethics", "labels": ["ethics", "kant"], "split": "train"},
    {"text": "A proof theory question about natural deduction in logic", "labels": ["logic"], "split": "test"},
    {"text": "Why Descartes doubted his senses, skepticism explained", "labels": ["skepticism"], "split": "test"},
    {"text": "The categorical imperative of Kant and moral ethics", "labels": ["ethics", "kant"], "split": "test"},
    {"text": "Theories of mind and artificial consciousness", "labels": ["mind"], "split": "test"},
]

# Hand-picked vectors so averages are checkable on paper.
GLOVE_LINES = [
    "ethics 0.10 0.20 0.30 0.40",
    "kant -0.50 0.25 0.00 1.00",
    "logic 0.00 -1.00 0.50 0.25",
    "skepticism 0.80 0.10 -0.20 0.40",
    "mind 0.30 0.60 -0.90 0.10",
    "moral 0.70 -0.30 0.20 -0.10",
    "philosophy 0.20 0.20 0.20 0.20",
    "of -0.10 0.00 0.10 0.00",
]

REUTERS_FILE_0 = """<!DOCTYPE lewis SYSTEM "lewis.dtd">
<REUTERS TOPICS="YES" LEWISSPLIT="TRAIN" CGISPLIT="TRAINING-SET" OLDID="1" NEWID="1">
<DATE>26-FEB-1987 15:01:01.79</DATE>
<TOPICS><D>grain</D><D>wheat</D></TOPICS>
<PLACES><D>usa</D></PLACES>
<PEOPLE></PEOPLE>
<ORGS></ORGS>
<EXCHANGES></EXCHANGES>
<TEXT>
<TITLE>GRAIN SHIPMENTS SET RECORD</TITLE>
<DATELINE>CHICAGO, Feb 26 -</DATELINE>
<BODY>Wheat and corn shipments rose sharply this season.
 Reuter
&#3;</BODY>
</TEXT>
</REUTERS>
<REUTERS TOPICS="YES" LEWISSPLIT="TRAIN" CGISPLIT="TRAINING-SET" OLDID="2" NEWID="2">
<DATE>26-FEB-1987 15:02:20.00</DATE>
<TOPICS><D>money-fx</D></TOPICS>
<PLACES></PLACES>
<TEXT TYPE="BRIEF">
<TITLE>DOLLAR RISES AGAINST YEN</TITLE>
&#2;
</TEXT>
</REUTERS>
<REUTERS TOPICS="YES" LEWISSPLIT="TRAIN" CGISPLIT="TRAINING-SET" OLDID="3" NEWID="3">
<DATE>26-FEB-1987 15:03:00.00</DATE>
<TOPICS></TOPICS>
<PLACES><D>uk</D></PLACES>
<TEXT>
<TITLE>NO TOPICS HERE</TITLE>
<BODY>This document was judged about nothing.
</BODY>
</TEXT>
</REUTERS>
<REUTERS TOPICS="NO" LEWISSPLIT="NOT-USED" CGISPLIT="TRAINING-SET" OLDID="4" NEWID="4">
<DATE>26-FEB-1987 15:04:00.00</DATE>
<TOPICS><D>grain</D></TOPICS>
<TEXT>
<TITLE>SKIPPED DOCUMENT</TITLE>
<BODY>Not part of the split.
</BODY>
</TEXT>
</REUTERS>
"""

REUTERS_FILE_1 = """<!DOCTYPE lewis SYSTEM "lewis.dtd">
<REUTERS TOPICS="YES" LEWISSPLIT="TEST" CGISPLIT="PUBLISHED-TESTSET" OLDID="5" NEWID="5">
<DATE>02-MAR-1987 11:20:00.00</DATE>
<TOPICS><D>wheat</D></TOPICS>
<PLACES><D>canada</D></PLACES>
<TEXT>
<TITLE>WHEAT PRICES &lt;UP&gt; SHARPLY</TITLE>
<DATELINE>WINNIPEG, March 2 -</DATELINE>
<BODY>Prices rose as exports increased more than 10 pct.
 Reuter
&#3;</BODY>
</TEXT>
</REUTERS>
<REUTERS TOPICS="YES" LEWISSPLIT="TEST" CGISPLIT="PUBLISHED-TESTSET" OLDID="6" NEWID="6">
<DATE>02-MAR-1987 11:25:00.00</DATE>
<TOPICS><D>mystery-topic</D></TOPICS>
<TEXT>
<TITLE>UNKNOWN CATEGORY STORY</TITLE>
<BODY>The topic of this one is not in the category list.
</BODY>
</TEXT>
</REUTERS>
"""

# Category list: two entries (corn, ship) never occur in any document.
REUTERS_TOPICS = ["corn", "grain", "money-fx", "ship", "wheat"]

POSTS_ROWS = [
    ('1', '1', "Is lying always wrong?", "<p>A question about the ethics of lying.</p>", ["ethics", "kant"]),
    ('2', '2', "", "<p>An answer, not a question.</p>", None),
    ('4', '1', "What is modal logic?", "<p>Necessity and possibility operators.</p>", ["logic"]),
    ('3', '1', "Brain in a vat", "<p>Radical <em>skepticism</em> scenario.</p>", ["skepticism"]),
    ('9', '1', "Dualism and mind", "<p>How do mind and body interact?</p>", ["philosophy-of-mind"]),
    ('7', '1', "Categorical imperative", "<p>Kant on universal maxims.</p>", ["ethics", "kant"]),
    ('12', '1', "Untagged question", "<p>No tags on this one.</p>", []),
    ('15', '1', "Validity and soundness", "<p>Distinguish valid from sound arguments.</p>", ["logic"]),
]


def _xml_escape(text):
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def write_posts_xml(path, tag_style):
    """Write a Posts.xml fixture using angle or pipe delimited tag lists."""
    lines = ['<?xml version="1.0" encoding="utf-8"?>', "<posts>"]
    for post_id, type_id, title, body, tags in POSTS_ROWS:
        attrs = [f'Id="{post_id}"', f'PostTypeId="{type_id}"']
        if title:
            attrs.append(f'Title="{_xml_escape(title)}"')
        attrs.append(f'Body="{_xml_escape(body)}"')
        if tags is not None:
            if tag_style == "angle":
                raw = "".join(f"<{tag}>" for tag in tags)
            else:
                raw = "|" + "|".join(tags) + "|" if tags else ""
            attrs.append(f'Tags="{_xml_escape(raw)}"')
        lines.append("  <row " + " ".join(attrs) + " />")
    lines.append("</posts>")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def jsonl_corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("jsonl") / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for row in JSONL_ROWS:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture(scope="session")
def glove_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("glove") / "vectors.txt"
    path.write_text("\n".join(GLOVE_LINES) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def glove_lines():
    return list(GLOVE_LINES)


@pytest.fixture(scope="session")
def reuters_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("reuters")
    (directory / "reut2-000.sgm").write_text(REUTERS_FILE_0, encoding="latin-1")
    (directory / "reut2-001.sgm").write_text(REUTERS_FILE_1, encoding="latin-1")
    (directory / "all-topics-strings.lc.txt").write_text(
        "\n".join(REUTERS_TOPICS) + "\n", encoding="latin-1"
    )
    return directory


@pytest.fixture(scope="session")
def posts_xml_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("stackex") / "Posts.xml"
    write_posts_xml(path, "angle")
    return path


@pytest.fixture(scope="session")
def posts_xml_pipes_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("stackex_pipes") / "Posts.xml"
    write_posts_xml(path, "pipe")
    return path
