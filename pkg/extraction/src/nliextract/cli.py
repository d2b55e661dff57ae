"""Command line entry points: extract-features and extract-embeddings.

extract-features reads a corpus, scores every premise against every label
hypothesis, and writes a complete dataset directory (feature files, test
ground truth, optional label embeddings, manifest).  extract-embeddings
writes just the label embedding file for an existing label list.

Exit codes: 0 success, 3 file I/O failure, 4 validation or configuration
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import CORPUS_FORMATS, SETTINGS, ExtractionConfig, ExtractionError
from .corpus import load_corpus
from .extract import extract_label_embeddings, run_extraction

logger = logging.getLogger(__name__)


def _config_from_args(args: argparse.Namespace) -> ExtractionConfig:
    config = ExtractionConfig()
    config.corpus = args.corpus
    config.corpus_format = args.corpus_format
    for name in ("model", "template", "max_length", "batch_size", "setting", "seed",
                 "train_fraction"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "glove", None) is not None:
        config.embedding_source = args.glove
    if getattr(args, "body_only", False):
        config.include_title = False
    config.validate()
    return config


def _load_labels_from_manifest(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ExtractionError(f"{path}: not valid JSON ({exc})")
    if not isinstance(raw, dict) or "labels" not in raw:
        raise ExtractionError(f"{path}: manifest must be a JSON object with a labels list")
    labels = raw["labels"]
    if not isinstance(labels, list) or not labels:
        raise ExtractionError(f"{path}: manifest labels list is empty")
    return [str(label) for label in labels]


def cmd_extract_features(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = load_corpus(
        args.corpus,
        config.corpus_format,
        include_title=config.include_title,
        train_fraction=config.train_fraction,
    )
    paths = run_extraction(corpus, config, args.out_dir, manifest_name=args.manifest_name)
    print(f"labels={corpus.n_labels} train={len(corpus.train)} test={len(corpus.test)}")
    print(f"backend={config.model} max_length={config.max_length} setting={config.setting}")
    for key in ("train_features", "test_features", "test_labels", "embeddings"):
        if key in paths:
            print(f"wrote[{key}]={paths[key]}")
    print(f"manifest={paths['manifest']}")
    return 0


def cmd_extract_embeddings(args: argparse.Namespace) -> int:
    if (args.corpus is None) == (args.manifest is None):
        raise ExtractionError("pass exactly one label source: --corpus or --manifest")
    config = ExtractionConfig(embedding_source=args.glove)
    if args.corpus is not None:
        config.corpus = args.corpus
        config.corpus_format = args.corpus_format
        if args.body_only:
            config.include_title = False
        if args.train_fraction is not None:
            config.train_fraction = args.train_fraction
        config.validate()
        corpus = load_corpus(
            args.corpus,
            config.corpus_format,
            include_title=config.include_title,
            train_fraction=config.train_fraction,
        )
        descriptions = list(corpus.descriptions)
    else:
        config.validate()
        descriptions = _load_labels_from_manifest(args.manifest)
    vectors = extract_label_embeddings(descriptions, config, args.out)
    print(f"labels={len(descriptions)} dim={vectors.shape[1]}")
    print(f"wrote[embeddings]={args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nliextract",
        description="Extract NLI features and label embeddings to interchange files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-features", help="extract a full dataset from a corpus")
    p.add_argument("--corpus", required=True, help="corpus file or directory")
    p.add_argument("--format", dest="corpus_format", choices=CORPUS_FORMATS, default="jsonl")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--model", default=None, help="NLI model identifier, or 'stub'")
    p.add_argument("--template", default=None, help="hypothesis template with one {} placeholder")
    p.add_argument("--max-length", dest="max_length", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--setting", choices=SETTINGS, default=None)
    p.add_argument("--seed", type=int, default=None, help="seed for the annotated subset")
    p.add_argument("--glove", default=None, help="word-vector file; also writes embeddings")
    p.add_argument("--body-only", dest="body_only", action="store_true",
                   help="premise is the body text without the title")
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.add_argument("--manifest-name", dest="manifest_name", default=None)
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("extract-embeddings", help="write label embeddings for a label list")
    p.add_argument("--glove", required=True, help="word-vector file")
    p.add_argument("--out", required=True, help="embedding file output path")
    p.add_argument("--corpus", default=None, help="corpus to take the label list from")
    p.add_argument("--format", dest="corpus_format", choices=CORPUS_FORMATS, default="jsonl")
    p.add_argument("--manifest", default=None, help="manifest to take the label list from")
    p.add_argument("--body-only", dest="body_only", action="store_true")
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.set_defaults(func=cmd_extract_embeddings)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        return args.func(args)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
