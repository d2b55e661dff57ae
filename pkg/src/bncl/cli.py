"""Command line entry points.

Subcommands: synth, graph, train, eval, gradcheck, ablate.  Options can come
from a flat JSON config file (keys match the long flag names with
underscores); explicit flags override the file.  The seed falls back to the
BNCL_SEED environment variable when neither a flag nor the config provides
one.

Exit codes: 0 success, 1 a requested check failed, 2 numeric or config
degeneracy, 3 file I/O failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import interchange, label_graph, metrics, propagation, synth, trainer
from .interchange import (
    SETTING_ANNOTATION_FREE,
    Manifest,
    SupervisionConfig,
    ValidationError,
)
from .label_graph import DegenerateThresholdError
from .loss import LossConfig
from .trainer import NonFiniteLossError, TrainConfig

logger = logging.getLogger(__name__)

ENV_SEED = "BNCL_SEED"


@dataclass
class RunConfig:
    """Flat bag of every tunable the train/eval path understands."""

    seed: int = 0
    percentile_low: float = label_graph.DEFAULT_PERCENTILES[0]
    percentile_high: float = label_graph.DEFAULT_PERCENTILES[1]
    depth: int = 2
    alpha2: float = 0.1
    alpha3: float = 0.5
    alpha4: float = 100.0
    sharpness: float = 10.0
    learning_rate: float = 1e-3
    beta1: float = 0.8
    beta2: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 128
    epochs: int = 30
    lr_step: int = 10
    lr_decay: float = 0.9
    disable_l2: bool = False
    disable_l3: bool = False
    l2_population: str = "batch"

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            batch_size=self.batch_size,
            epochs=self.epochs,
            lr_step=self.lr_step,
            lr_decay=self.lr_decay,
            seed=self.seed,
            l2_population=self.l2_population,
        )

    def loss_config(self) -> LossConfig:
        return LossConfig(
            alpha2=self.alpha2,
            alpha3=self.alpha3,
            alpha4=self.alpha4,
            sharpness=self.sharpness,
            disable_l2=self.disable_l2,
            disable_l3=self.disable_l3,
        )

    @property
    def percentile_pair(self) -> tuple[float, float]:
        return (self.percentile_low, self.percentile_high)


def _load_json_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a flat JSON object")
    return raw


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    file_values = _load_json_config(getattr(args, "config", None))
    for key, value in file_values.items():
        if key not in fields:
            raise ValidationError(f"unknown config key {key!r}")
        setattr(config, key, type(getattr(config, key))(value))
    seed_from_file = "seed" in file_values
    for name in fields:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            setattr(config, name, flag_value)
    if getattr(args, "percentiles", None) is not None:
        config.percentile_low, config.percentile_high = args.percentiles
    if getattr(args, "seed", None) is None and not seed_from_file:
        env = os.environ.get(ENV_SEED)
        if env is not None:
            try:
                config.seed = int(env)
            except ValueError:
                raise ValidationError(f"{ENV_SEED} must be an integer, got {env!r}")
    return config


def _require(manifest: Manifest, attr: str) -> Path:
    value = getattr(manifest, attr)
    if value is None:
        raise ValidationError(f"manifest does not reference a {attr} file")
    return value


def _build_graph(manifest: Manifest, pair: tuple[float, float]) -> label_graph.SignedLabelGraph:
    embeddings = interchange.load_embeddings(_require(manifest, "embeddings"))
    similarity = label_graph.similarity_matrix(embeddings)
    return label_graph.threshold_graph(similarity, pair)


def _graph_payload(graph: label_graph.SignedLabelGraph) -> dict:
    pos_edges = []
    neg_edges = []
    n = graph.n_labels
    for u in range(n):
        for v in range(u + 1, n):
            if graph.pos_adj[u, v]:
                pos_edges.append([u, v])
            if graph.neg_adj[u, v]:
                neg_edges.append([u, v])
    return {
        "n_labels": n,
        "percentile_pair": list(graph.percentile_pair),
        "delta_neg": graph.delta_neg,
        "delta_pos": graph.delta_pos,
        "positive_edges": pos_edges,
        "negative_edges": neg_edges,
    }


def _write_json(path: str | Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synth(args: argparse.Namespace) -> int:
    values = _load_json_config(args.config)
    fields = {f.name for f in dataclasses.fields(synth.SynthConfig)}
    for key in values:
        if key not in fields:
            raise ValidationError(f"unknown synth config key {key!r}")
    config = synth.SynthConfig(**values)
    for name in fields:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            setattr(config, name, flag_value)
    if args.seed is None and "seed" not in values:
        env = os.environ.get(ENV_SEED)
        if env is not None:
            config.seed = int(env)
    bundle = synth.generate(config)
    paths = synth.write_dataset(bundle, args.out)
    print(f"labels={config.n_labels} clusters={config.cluster_count} "
          f"train={config.n_train} test={config.n_test}")
    print(f"kappa={bundle.kappa:.4f} mean_lambda={bundle.lambdas.mean():.4f} "
          f"annotated={len(bundle.annotations)}")
    for setting in sorted(synth.MANIFEST_BASENAMES):
        print(f"manifest[{setting}]={paths[setting]}")
    return 0


def cmd_graph(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    manifest = interchange.load_manifest(args.manifest)
    graph = _build_graph(manifest, config.percentile_pair)
    _write_json(args.out, _graph_payload(graph))
    if args.edge_list:
        label_graph.export_edge_list(graph, args.edge_list)
    n_pos, n_neg = graph.edge_counts()
    print(f"positive_edges={n_pos} negative_edges={n_neg} "
          f"delta_neg={graph.delta_neg:.6f} delta_pos={graph.delta_pos:.6f}")
    return 0


def _history_payload(result: trainer.TrainResult) -> dict:
    epochs = []
    for entry in result.history.entries:
        epochs.append(
            {
                "epoch": entry.epoch,
                "learning_rate": entry.learning_rate,
                "l1": entry.loss.l1,
                "l2": entry.loss.l2,
                "l3": entry.loss.l3,
                "l4": entry.loss.l4,
                "total": entry.loss.total,
            }
        )
    active = ["l1"]
    if result.history.entries:
        flags = result.history.entries[0].loss.active
        active = [name for name, on in zip(("l1", "l2", "l3", "l4"), flags) if on]
    return {"active_components": active, "epochs": epochs}


def cmd_train(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    manifest = interchange.load_manifest(args.manifest)
    features = interchange.load_features(manifest.train_features)
    supervision = manifest.supervision

    if (
        supervision.setting == SETTING_ANNOTATION_FREE
        and config.disable_l2
        and config.disable_l3
    ):
        logger.warning(
            "annotation-free training with the frequency and cardinality "
            "components disabled: only the hesitancy component remains active"
        )

    initial_params = None
    initial_opt_state = None
    start_epoch = 0
    pair = config.percentile_pair
    if args.resume:
        checkpoint = trainer.load_checkpoint(args.resume)
        initial_params = checkpoint.params
        initial_opt_state = checkpoint.opt_state
        start_epoch = checkpoint.epochs_completed
        pair = checkpoint.percentile_pair
        config.depth = checkpoint.depth
        logger.info(
            "resuming at epoch %d with percentile pair (%g, %g)",
            start_epoch, pair[0], pair[1],
        )

    graph = _build_graph(manifest, pair)
    neighborhoods = label_graph.balanced_neighborhoods(graph, config.depth)
    result = trainer.train(
        features,
        supervision,
        neighborhoods,
        config.train_config(),
        config.loss_config(),
        initial_params=initial_params,
        initial_opt_state=initial_opt_state,
        start_epoch=start_epoch,
    )
    trainer.save_checkpoint(
        args.checkpoint, result.params, result.opt_state, config.epochs, pair
    )
    history_path = args.history or f"{args.checkpoint}.history.json"
    _write_json(history_path, _history_payload(result))
    print(f"checkpoint={args.checkpoint}")
    print(f"history={history_path}")
    return 0


def _evaluate_checkpoint(
    manifest: Manifest, checkpoint: trainer.Checkpoint
) -> dict[str, metrics.MetricsReport]:
    features = interchange.load_features(_require(manifest, "test_features"))
    truth = interchange.load_ground_truth(_require(manifest, "test_labels"))
    if truth.n_samples != features.n_samples:
        raise ValidationError(
            f"test labels cover {truth.n_samples} samples, features {features.n_samples}"
        )
    graph = _build_graph(manifest, checkpoint.percentile_pair)
    neighborhoods = label_graph.balanced_neighborhoods(graph, checkpoint.depth)
    h0, hbar0 = propagation.init_hidden(features)
    states = propagation.forward(h0, hbar0, checkpoint.params, neighborhoods)
    predicted = propagation.predict(states)
    baseline = propagation.baseline_0shot(features)
    return {
        "bncl": metrics.compute_all(truth.labels, predicted),
        "0shot": metrics.compute_all(truth.labels, baseline),
    }


def cmd_eval(args: argparse.Namespace) -> int:
    manifest = interchange.load_manifest(args.manifest)
    checkpoint = trainer.load_checkpoint(args.checkpoint)
    reports = _evaluate_checkpoint(manifest, checkpoint)
    print(metrics.format_table(reports))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(metrics.report_to_json(reports))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    manifest = interchange.load_manifest(args.manifest)
    features = interchange.load_features(manifest.train_features)
    supervision = trainer.resolve_supervision(manifest.supervision)

    graph = _build_graph(manifest, config.percentile_pair)
    neighborhoods = label_graph.balanced_neighborhoods(graph, config.depth)
    params = propagation.init_params(features.n_labels, config.depth, config.seed)

    h0, hbar0 = propagation.init_hidden(features)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    take = min(args.batch, features.n_samples)
    rows = np.sort(rng.choice(features.n_samples, size=take, replace=False))
    annotations = {}
    for pos, sample in enumerate(rows):
        vec = supervision.annotations.get(int(sample))
        if vec is not None:
            annotations[pos] = vec
    batch = trainer.Batch(h0=h0[rows], hbar0=hbar0[rows], annotations=annotations)

    report = trainer.grad_check(
        params,
        batch,
        neighborhoods,
        config.loss_config(),
        supervision,
        n_entries=args.entries,
        fd_step=args.step,
        seed=config.seed,
        self_test_corrupt=args.self_test_corrupt,
    )
    print(
        f"checked={report.n_checked} kink_skipped={report.n_kink_skipped} "
        f"masked_excluded={report.n_masked_excluded}"
    )
    print(f"max_rel_error={report.max_rel_error:.3e} mean_rel_error={report.mean_rel_error:.3e}")
    if not report.passed(args.bound):
        print(f"FAIL: max relative error exceeds bound {args.bound:g}", file=sys.stderr)
        return 1
    print(f"PASS: within bound {args.bound:g}")
    return 0


ABLATION_VARIANTS = (
    ("full", False, False),
    ("no_l2", True, False),
    ("no_l3", False, True),
    ("no_l2_l3", True, True),
)


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    manifest = interchange.load_manifest(args.manifest)
    features = interchange.load_features(manifest.train_features)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    graph = _build_graph(manifest, config.percentile_pair)
    neighborhoods = label_graph.balanced_neighborhoods(graph, config.depth)

    summary = {}
    table = {}
    for name, no_l2, no_l3 in ABLATION_VARIANTS:
        loss_config = config.loss_config()
        loss_config.disable_l2 = no_l2
        loss_config.disable_l3 = no_l3
        logger.info("ablation variant %s", name)
        result = trainer.train(
            features, manifest.supervision, neighborhoods,
            config.train_config(), loss_config,
        )
        variant_dir = out_dir / name
        variant_dir.mkdir(exist_ok=True)
        trainer.save_checkpoint(
            variant_dir / "checkpoint.bin", result.params, result.opt_state,
            config.epochs, config.percentile_pair,
        )
        _write_json(variant_dir / "history.json", _history_payload(result))
        checkpoint = trainer.load_checkpoint(variant_dir / "checkpoint.bin")
        reports = _evaluate_checkpoint(manifest, checkpoint)
        with open(variant_dir / "report.json", "w", encoding="utf-8") as fh:
            fh.write(metrics.report_to_json(reports))
        summary[name] = reports["bncl"].scores()
        table[name] = reports["bncl"]
        if "0shot" not in table:
            table["0shot"] = reports["0shot"]
    _write_json(out_dir / "summary.json", summary)
    print(metrics.format_table(table))
    return 0


def _add_run_flags(parser: argparse.ArgumentParser, with_train: bool = True) -> None:
    parser.add_argument("--config", help="flat JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--percentiles", nargs=2, type=float, metavar=("LOW", "HIGH"), default=None)
    parser.add_argument("--depth", type=int, default=None, help="number of propagation layers")
    if with_train:
        parser.add_argument("--alpha2", type=float, default=None)
        parser.add_argument("--alpha3", type=float, default=None)
        parser.add_argument("--alpha4", type=float, default=None)
        parser.add_argument("--sharpness", type=float, default=None)
        parser.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        parser.add_argument("--beta1", type=float, default=None)
        parser.add_argument("--beta2", type=float, default=None)
        parser.add_argument("--epsilon", type=float, default=None)
        parser.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        parser.add_argument("--epochs", type=int, default=None)
        parser.add_argument("--lr-step", dest="lr_step", type=int, default=None)
        parser.add_argument("--lr-decay", dest="lr_decay", type=float, default=None)
        parser.add_argument("--disable-l2", dest="disable_l2", action="store_true", default=None)
        parser.add_argument("--disable-l3", dest="disable_l3", action="store_true", default=None)
        parser.add_argument(
            "--l2-population", dest="l2_population", choices=trainer.L2_POPULATION_MODES,
            default=None,
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bncl",
        description="Weakly supervised multi-label classification over a signed label graph",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file with synth config keys")
    p.add_argument("--n-labels", dest="n_labels", type=int, default=None)
    p.add_argument("--n-train", dest="n_train", type=int, default=None)
    p.add_argument("--n-test", dest="n_test", type=int, default=None)
    p.add_argument("--cluster-count", dest="cluster_count", type=int, default=None)
    p.add_argument("--rho-pos", dest="rho_pos", type=float, default=None)
    p.add_argument("--rho-neg", dest="rho_neg", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--neutral-mass", dest="neutral_mass", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int, default=None)
    p.add_argument("--embedding-jitter", dest="embedding_jitter", type=float, default=None)
    p.add_argument("--hard-label-fraction", dest="hard_label_fraction", type=float, default=None)
    p.add_argument("--annotated-count", dest="annotated_count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("graph", help="build and export the signed label graph")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="graph JSON output path")
    p.add_argument("--edge-list", dest="edge_list", help="optional edge-list text export")
    _add_run_flags(p, with_train=False)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train", help="train and write a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True, help="checkpoint output path")
    p.add_argument("--history", help="history JSON output path (default: <checkpoint>.history.json)")
    p.add_argument("--resume", help="checkpoint to resume from")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against test labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", help="JSON report output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--manifest", required=True)
    p.add_argument("--batch", type=int, default=16, help="batch rows sampled for the check")
    p.add_argument("--entries", type=int, default=120, help="weights sampled for the check")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--bound", type=float, default=1e-3)
    p.add_argument("--self-test-corrupt", dest="self_test_corrupt", action="store_true",
                   help=argparse.SUPPRESS)
    _add_run_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train/eval the four loss-component variants")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_run_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        return args.func(args)
    except (DegenerateThresholdError, NonFiniteLossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
