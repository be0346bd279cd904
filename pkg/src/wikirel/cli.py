"""Command-line pipeline orchestration.

Configuration comes from an optional JSON config file plus flags; flags win.
Exit codes: 0 success, 1 usage error, 2 data error. Every report embeds the
tool version, the effective config, and sha256 digests of its inputs, and all
outputs are written atomically under the output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .boost import (
    TrainConfig,
    attribute_matrix,
    dumps_ensemble,
    load_ensemble,
    score_matrix,
    train_matrix,
)
from .corpus import load_corpus, parse_timestamp
from .evaluate import (
    DataError,
    adapt,
    evaluate_native,
    log_grid,
    random_baseline,
    scaling_experiment,
)
from .extract import UrlCanonicalizer, analyze_dataset, load_redirect_map
from .features import (
    FEATURE_IDS,
    FeatureMatrix,
    catalog_fingerprint,
    compute_features,
    quantile_normalize,
)
from .labels import LabelSet, load_label_csv
from .psl import SuffixRules, bundled
from .timeline import build_dataset_timelines


@dataclass(frozen=True)
class RunConfig:
    """Effective run configuration; serialized verbatim into every report."""

    corpus: str | None = None
    labels: str | None = None
    label_source: str = "perennial"
    out: str | None = None
    topic: str = ""
    language: str = ""
    learning_rate: float = 0.1
    max_depth: int = 1
    rounds: int = 100
    reg_lambda: float = 1.0
    min_gain: float = 0.0
    pos_weight: float | None = None
    base_margin: float = 0.0
    mode: str | None = None
    normalize: str = "none"
    seed: int = 0
    n_bootstrap: int = 100
    grid: tuple[int, ...] | None = None
    repeats: int = 10
    cutoff: str | None = None
    suffix_list: str | None = None
    redirect_map: str | None = None
    match_priors: bool = False
    compare_random: bool = False
    m_comparisons: int = 1
    top_k: int = 10
    min_per_class: int = 2
    remove_test_only: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["grid"] = list(self.grid) if self.grid is not None else None
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if obj.get("grid") is not None:
            obj = {**obj, "grid": tuple(int(v) for v in obj["grid"])}
        return cls(**obj)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            max_depth=self.max_depth,
            rounds=self.rounds,
            reg_lambda=self.reg_lambda,
            min_gain=self.min_gain,
            pos_weight=self.pos_weight,
            base_margin=self.base_margin,
        )


class _Parser(argparse.ArgumentParser):
    """argparse with the usage-error exit code pinned to 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


_PATH_FIELDS = ("corpus", "labels", "suffix_list", "redirect_map")


def _envelope(config: RunConfig, inputs: list[Path]) -> dict:
    """Report header: tool version, effective config, input digests.

    Path-valued config fields are reduced to basenames and the output
    directory is omitted, so reports are byte-identical wherever the run
    happens. Inputs are keyed by basename too.
    """
    embedded = config.to_dict()
    embedded["out"] = None
    for field in _PATH_FIELDS:
        if embedded.get(field):
            embedded[field] = Path(embedded[field]).name
    return {
        "tool": "wikirel",
        "version": __version__,
        "config": embedded,
        "inputs": {p.name: _sha256(p) for p in sorted(inputs, key=lambda p: p.name)},
    }


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, obj: dict) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _slug(text: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9_-]+", "-", text).strip("-")
    return slug or "unnamed"


def _out_dir(config: RunConfig) -> Path:
    if not config.out:
        raise DataError("an output directory is required (--out)")
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_rules(config: RunConfig) -> SuffixRules:
    return SuffixRules.from_file(config.suffix_list) if config.suffix_list else bundled()


def _load_labels(config: RunConfig, rules: SuffixRules) -> LabelSet:
    if not config.labels:
        raise DataError("a label file is required (--labels)")
    return load_label_csv(config.labels, source=config.label_source, rules=rules)


def _parse_cutoff(text: str) -> datetime:
    """A bare date means end of that day (the cutoff keeps the full day)."""
    if re.fullmatch(r"\d{4}-\d{2}-\d{2}", text):
        return datetime.strptime(text, "%Y-%m-%d").replace(
            hour=23, minute=59, second=59, tzinfo=timezone.utc
        )
    return parse_timestamp(text)


def _select_dataset(datasets, config: RunConfig):
    if config.topic or config.language:
        matches = [
            d
            for d in datasets
            if (not config.topic or d.topic == config.topic)
            and (not config.language or d.language == config.language)
        ]
    else:
        matches = list(datasets)
    if len(matches) != 1:
        keys = [f"{d.topic}/{d.language}" for d in datasets]
        raise DataError(
            f"need exactly one dataset (found {len(matches)}; corpus has {keys}); "
            "select one with --topic/--language"
        )
    return matches[0]


def _matrix_from_config(config: RunConfig, path: str) -> FeatureMatrix:
    return FeatureMatrix.from_csv(path, topic=config.topic, language=config.language)


def _cmd_extract(config: RunConfig) -> int:
    if not config.corpus:
        raise DataError("a corpus file is required (--corpus)")
    out = _out_dir(config)
    rules = _load_rules(config)
    redirects = load_redirect_map(config.redirect_map) if config.redirect_map else None
    datasets = load_corpus(config.corpus)

    edit_lines: list[str] = []
    timeline_lines: list[str] = []
    counters = {
        "n_datasets": len(datasets),
        "n_articles": 0,
        "n_revisions": 0,
        "n_merged_revisions": 0,
        "n_source_edits": 0,
    }
    canonicalizer = UrlCanonicalizer(redirects)
    for dataset in datasets:
        analyzed = analyze_dataset(dataset, canonicalizer, rules)
        timelines = build_dataset_timelines(analyzed)
        counters["n_articles"] += len(dataset.articles)
        counters["n_revisions"] += sum(len(a.revisions) for a in dataset.articles)
        for page_id in sorted(analyzed):
            art = analyzed[page_id]
            counters["n_merged_revisions"] += len(art.merged)
            counters["n_source_edits"] += len(art.edits)
            for edit in art.edits:
                record = {"topic": dataset.topic, "language": dataset.language}
                record.update(edit.to_dict())
                edit_lines.append(json.dumps(record, sort_keys=True))
            for domain in sorted(timelines[page_id]):
                t = timelines[page_id][domain]
                timeline_lines.append(
                    json.dumps(
                        {
                            "topic": dataset.topic,
                            "language": dataset.language,
                            "page_id": t.page_id,
                            "domain": t.domain,
                            "perm_days": t.perm_days,
                            "perm_revs": t.perm_revs,
                            "age_days": t.age_days,
                            "age_revs": t.age_revs,
                            "currently_present": t.currently_present,
                            "n_adds": len(t.adds),
                            "n_removes": len(t.removes),
                        },
                        sort_keys=True,
                    )
                )
    _write_text(out / "source_edits.jsonl", "\n".join(edit_lines) + ("\n" if edit_lines else ""))
    _write_text(out / "timelines.jsonl", "\n".join(timeline_lines) + ("\n" if timeline_lines else ""))
    report = _envelope(config, [Path(config.corpus)])
    report["counters"] = {
        **counters,
        "urls_accepted": canonicalizer.accepted,
        "urls_rejected": canonicalizer.rejected,
    }
    _write_json(out / "extract_report.json", report)
    return 0


def _cmd_features(config: RunConfig) -> int:
    if not config.corpus:
        raise DataError("a corpus file is required (--corpus)")
    out = _out_dir(config)
    rules = _load_rules(config)
    redirects = load_redirect_map(config.redirect_map) if config.redirect_map else None
    datasets = load_corpus(config.corpus)
    labels = None
    inputs = [Path(config.corpus)]
    if config.labels:
        labels = _load_labels(config, rules)
        inputs.append(Path(config.labels))

    per_dataset = {}
    canonicalizer = UrlCanonicalizer(redirects)
    for dataset in datasets:
        analyzed = analyze_dataset(dataset, canonicalizer, rules)
        timelines = build_dataset_timelines(analyzed)
        matrix = compute_features(dataset, timelines)
        if labels is not None:
            matrix = matrix.with_labels(labels.binary)
        if config.normalize == "quantile" and len(matrix):
            matrix = quantile_normalize(matrix)
        name = f"features_{_slug(dataset.topic)}_{_slug(dataset.language)}.csv"
        matrix.to_csv(out / name)
        n_labeled = sum(
            1 for v in (matrix.labels or ()) if v is not None
        )
        per_dataset[f"{dataset.topic}/{dataset.language}"] = {
            "file": name,
            "n_domains": len(matrix),
            "n_labeled": n_labeled,
        }
    report = _envelope(config, inputs)
    report["catalog_fingerprint"] = catalog_fingerprint()
    report["datasets"] = per_dataset
    _write_json(out / "features_report.json", report)
    return 0


def _labeled_matrix(config: RunConfig, features_path: str) -> tuple[FeatureMatrix, list[Path]]:
    matrix = _matrix_from_config(config, features_path)
    inputs = [Path(features_path)]
    if matrix.labels is None:
        rules = _load_rules(config)
        labels = _load_labels(config, rules)
        matrix = matrix.with_labels(labels.binary)
        inputs.append(Path(config.labels))
    return matrix, inputs


def _cmd_train(config: RunConfig, features_path: str) -> int:
    out = _out_dir(config)
    matrix, inputs = _labeled_matrix(config, features_path)
    ensemble = train_matrix(matrix, config.train_config())
    _write_text(out / "ensemble.json", dumps_ensemble(ensemble))
    report = _envelope(config, inputs)
    report["n_trees"] = len(ensemble.trees)
    report["class_counts"] = {
        "unreliable": ensemble.class_counts[0],
        "reliable": ensemble.class_counts[1],
    }
    report["catalog_fingerprint"] = ensemble.fingerprint
    _write_json(out / "train_report.json", report)
    return 0


def _cmd_score(config: RunConfig, ensemble_path: str, features_path: str) -> int:
    out = _out_dir(config)
    ensemble = load_ensemble(ensemble_path)
    matrix = _matrix_from_config(config, features_path)
    scored = score_matrix(ensemble, matrix)
    lines = ["domain,margin,probability,predicted_label"]
    for domain, margin, proba in scored:
        label = 1 if proba >= 0.5 else 0
        lines.append(f"{domain},{format(margin, '.17g')},{format(proba, '.17g')},{label}")
    _write_text(out / "scores.csv", "\n".join(lines) + "\n")
    report = _envelope(config, [Path(ensemble_path), Path(features_path)])
    report["n_scored"] = len(scored)
    _write_json(out / "score_report.json", report)
    return 0


def _cmd_explain(
    config: RunConfig, ensemble_path: str, features_path: str, background_path: str | None
) -> int:
    out = _out_dir(config)
    ensemble = load_ensemble(ensemble_path)
    matrix = _matrix_from_config(config, features_path)
    if len(matrix) == 0:
        raise DataError("features file has no rows to explain")
    background = _matrix_from_config(config, background_path) if background_path else None
    phi, base_value = attribute_matrix(ensemble, matrix, background)

    lines = ["domain," + ",".join(FEATURE_IDS)]
    for i, domain in enumerate(matrix.domains):
        lines.append(domain + "," + ",".join(format(v, ".17g") for v in phi[i]))
    _write_text(out / "attributions.csv", "\n".join(lines) + "\n")

    mean_abs = np.abs(phi).mean(axis=0)
    order = np.argsort(-mean_abs, kind="stable")[: config.top_k]
    inputs = [Path(ensemble_path), Path(features_path)]
    if background_path:
        inputs.append(Path(background_path))
    report = _envelope(config, inputs)
    report["base_value"] = base_value
    report["top_features"] = [
        {"feature": FEATURE_IDS[j], "mean_abs_contribution": float(mean_abs[j])}
        for j in order
    ]
    _write_json(out / "explain_summary.json", report)
    return 0


def _cmd_evaluate(config: RunConfig, features_path: str) -> int:
    out = _out_dir(config)
    matrix, inputs = _labeled_matrix(config, features_path)
    if config.normalize == "quantile" and len(matrix):
        matrix = quantile_normalize(matrix)
    report_obj = evaluate_native(
        matrix,
        config.train_config(),
        n_bootstrap=config.n_bootstrap,
        seed=config.seed,
        compare_random=config.compare_random,
        m_comparisons=config.m_comparisons,
    )
    report = _envelope(config, inputs)
    report["report"] = report_obj.to_dict()
    _write_json(out / "eval_report.json", report)
    return 0


def _cmd_adapt(
    config: RunConfig,
    train_paths: list[str],
    test_path: str,
    train_keys: list[str] | None,
    test_key: str | None,
) -> int:
    out = _out_dir(config)
    if not config.mode:
        raise DataError("an adaptation mode is required (--mode)")

    def parse_key(text: str | None) -> tuple[str, str]:
        if not text:
            return ("", "")
        topic, _, language = text.partition("/")
        return (topic, language)

    if train_keys and len(train_keys) != len(train_paths):
        raise DataError("--train-key count must match --train-features count")
    train_matrices = []
    for i, path in enumerate(train_paths):
        topic, language = parse_key(train_keys[i] if train_keys else None)
        train_matrices.append(FeatureMatrix.from_csv(path, topic=topic, language=language))
    topic, language = parse_key(test_key)
    test_matrix = FeatureMatrix.from_csv(test_path, topic=topic, language=language)

    labels_inputs: list[Path] = []
    if any(m.labels is None for m in train_matrices + [test_matrix]):
        rules = _load_rules(config)
        labels = _load_labels(config, rules)
        labels_inputs.append(Path(config.labels))
        train_matrices = [
            m if m.labels is not None else m.with_labels(labels.binary) for m in train_matrices
        ]
        if test_matrix.labels is None:
            test_matrix = test_matrix.with_labels(labels.binary)

    report_obj = adapt(
        train_matrices,
        test_matrix,
        mode=config.mode,
        normalize=config.normalize,
        cfg=config.train_config(),
        n_bootstrap=config.n_bootstrap,
        seed=config.seed,
        compare_random=config.compare_random,
        m_comparisons=config.m_comparisons,
        min_per_class=config.min_per_class,
        remove_test_only=config.remove_test_only,
    )
    report = _envelope(config, [Path(p) for p in train_paths + [test_path]] + labels_inputs)
    report["report"] = report_obj.to_dict()
    _write_json(out / "adapt_report.json", report)
    return 0


def _cmd_baseline(config: RunConfig, features_path: str) -> int:
    out = _out_dir(config)
    matrix, inputs = _labeled_matrix(config, features_path)
    _, y, domains = matrix.labeled_rows()
    if len(y) == 0:
        raise DataError("no labeled domains for the baseline")
    predictions, boot = random_baseline(
        y,
        n=config.n_bootstrap,
        seed=config.seed,
        match_priors=config.match_priors,
        domains=domains,
    )
    report = _envelope(config, inputs)
    report["baseline"] = {
        "match_priors": config.match_priors,
        "n_domains": len(predictions),
        "metrics": {
            name: {"mean": boot.means[name], "std": boot.stds[name]}
            for name in sorted(boot.means)
        },
    }
    _write_json(out / "baseline_report.json", report)
    return 0


def _cmd_experiment_scaling(config: RunConfig) -> int:
    if not config.corpus:
        raise DataError("a corpus file is required (--corpus)")
    out = _out_dir(config)
    rules = _load_rules(config)
    labels = _load_labels(config, rules)
    redirects = load_redirect_map(config.redirect_map) if config.redirect_map else None
    datasets = load_corpus(config.corpus)
    dataset = _select_dataset(datasets, config)
    grid = list(config.grid) if config.grid else log_grid()
    cutoff = _parse_cutoff(config.cutoff) if config.cutoff else None
    curve = scaling_experiment(
        dataset,
        labels,
        grid,
        repeats=config.repeats,
        cutoff=cutoff,
        cfg=config.train_config(),
        seed=config.seed,
        min_per_class=config.min_per_class,
        rules=rules,
        redirect_map=redirects,
    )
    report = _envelope(config, [Path(config.corpus), Path(config.labels)])
    report["curve"] = curve.to_dict()
    _write_json(out / "scaling_curve.json", report)
    csv_text = "\n".join(",".join(row) for row in curve.to_csv_rows()) + "\n"
    _write_text(out / "scaling_curve.csv", csv_text)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed recorded in reports")
    parser.add_argument("--topic", help="dataset topic key")
    parser.add_argument("--language", help="dataset language key")
    parser.add_argument("--suffix-list", dest="suffix_list",
                        help="replacement public-suffix rule file")
    parser.add_argument("--redirect-map", dest="redirect_map",
                        help="TSV of from<TAB>to URL prefix redirects")


def _add_train_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--max-depth", dest="max_depth", type=int)
    parser.add_argument("--rounds", type=int)
    parser.add_argument("--reg-lambda", dest="reg_lambda", type=float)
    parser.add_argument("--min-gain", dest="min_gain", type=float)
    parser.add_argument("--pos-weight", dest="pos_weight", type=float)
    parser.add_argument("--base-margin", dest="base_margin", type=float)


def _add_label_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--labels", help="label CSV (domain,category)")
    parser.add_argument("--label-source", dest="label_source",
                        choices=["perennial", "mbfc", "custom"])


def _add_eval_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-bootstrap", dest="n_bootstrap", type=int)
    parser.add_argument("--compare-random", dest="compare_random",
                        action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--m-comparisons", dest="m_comparisons", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="wikirel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"wikirel {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("extract", parents=[], help="corpus to source-edit/timeline dump")
    _add_common(p)
    p.add_argument("--corpus", help="JSONL corpus file")

    p = commands.add_parser("features", help="corpus to FeatureMatrix CSV per dataset")
    _add_common(p)
    p.add_argument("--corpus", help="JSONL corpus file")
    _add_label_params(p)
    p.add_argument("--normalize", choices=["none", "quantile"])

    p = commands.add_parser("train", help="labeled features CSV to ensemble file")
    _add_common(p)
    p.add_argument("--features", required=True, help="feature matrix CSV")
    _add_label_params(p)
    _add_train_params(p)

    p = commands.add_parser("score", help="per-domain probabilities from an ensemble")
    _add_common(p)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--features", required=True)

    p = commands.add_parser("explain", help="additive attribution table and top-k summary")
    _add_common(p)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--background", help="background matrix CSV (default: the features file)")
    p.add_argument("--top-k", dest="top_k", type=int)

    p = commands.add_parser("evaluate", help="native leave-one-out evaluation")
    _add_common(p)
    p.add_argument("--features", required=True)
    _add_label_params(p)
    _add_train_params(p)
    _add_eval_params(p)
    p.add_argument("--normalize", choices=["none", "quantile"])

    p = commands.add_parser("adapt", help="cross/mixed/pooled adaptation evaluation")
    _add_common(p)
    p.add_argument("--train-features", dest="train_features", action="append", required=True)
    p.add_argument("--test-features", dest="test_features", required=True)
    p.add_argument("--train-key", dest="train_key", action="append",
                   help="topic/language of a training matrix, in order")
    p.add_argument("--test-key", dest="test_key", help="topic/language of the test matrix")
    p.add_argument("--mode", choices=["cross-language", "cross-topic", "mixed", "pooled"])
    p.add_argument("--normalize", choices=["none", "quantile"])
    p.add_argument("--min-per-class", dest="min_per_class", type=int)
    p.add_argument("--remove-test-only", dest="remove_test_only",
                   action=argparse.BooleanOptionalAction, default=None)
    _add_label_params(p)
    _add_train_params(p)
    _add_eval_params(p)

    p = commands.add_parser("baseline", help="random-assignment baseline metrics")
    _add_common(p)
    p.add_argument("--features", required=True)
    _add_label_params(p)
    p.add_argument("--n-bootstrap", dest="n_bootstrap", type=int)
    p.add_argument("--match-priors", dest="match_priors",
                   action=argparse.BooleanOptionalAction, default=None)

    p = commands.add_parser("experiment", help="experiment drivers")
    experiments = p.add_subparsers(dest="experiment", required=True)
    ps = experiments.add_parser("scaling", help="F1 versus sampled revision count")
    _add_common(ps)
    ps.add_argument("--corpus", help="JSONL corpus file")
    _add_label_params(ps)
    _add_train_params(ps)
    ps.add_argument("--grid", help="comma-separated revision counts")
    ps.add_argument("--repeats", type=int)
    ps.add_argument("--cutoff", help="YYYY-MM-DD or full timestamp; keeps revisions up to it")
    ps.add_argument("--min-per-class", dest="min_per_class", type=int)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as handle:
            config = RunConfig.from_dict(json.load(handle))
    else:
        config = RunConfig()
    overrides = {}
    config_fields = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in config_fields and value is not None:
            overrides[key] = value
    if "grid" in overrides:
        overrides["grid"] = tuple(int(v) for v in str(overrides["grid"]).split(","))
    return replace(config, **overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "extract":
            return _cmd_extract(config)
        if args.command == "features":
            return _cmd_features(config)
        if args.command == "train":
            return _cmd_train(config, args.features)
        if args.command == "score":
            return _cmd_score(config, args.ensemble, args.features)
        if args.command == "explain":
            return _cmd_explain(config, args.ensemble, args.features, args.background)
        if args.command == "evaluate":
            return _cmd_evaluate(config, args.features)
        if args.command == "adapt":
            return _cmd_adapt(config, args.train_features, args.test_features,
                              args.train_key, args.test_key)
        if args.command == "baseline":
            return _cmd_baseline(config, args.features)
        if args.command == "experiment" and args.experiment == "scaling":
            return _cmd_experiment_scaling(config)
    except (ValueError, OSError) as exc:
        print(f"wikirel: error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
