"""End-to-end command-line behavior on the bundled mini corpus."""

import json
from pathlib import Path

import numpy as np
import pytest

from wikirel.cli import RunConfig, main
from wikirel.features import FEATURE_IDS, FeatureMatrix, catalog_fingerprint

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
CORPUS = str(FIXTURES / "mini_climate_en.jsonl")
LABELS = str(FIXTURES / "mini_perennial.csv")


def run(*argv: str) -> int:
    try:
        return main(list(argv))
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)


def read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory) -> Path:
    """One extract + features + train run shared by the downstream tests."""
    out = tmp_path_factory.mktemp("pipeline")
    assert run("extract", "--corpus", CORPUS, "--out", str(out)) == 0
    assert run(
        "features", "--corpus", CORPUS, "--labels", LABELS, "--out", str(out)
    ) == 0
    assert run(
        "train", "--features", str(out / "features_climate_en.csv"),
        "--out", str(out), "--seed", "0",
    ) == 0
    return out


# ---------------------------------------------------------------------------
# Exit codes and config plumbing


def test_usage_errors_exit_1(tmp_path, capsys):
    assert run() == 1
    assert run("bogus-command") == 1
    assert run("train", "--out", str(tmp_path)) == 1  # --features is required
    capsys.readouterr()


def test_data_errors_exit_2(tmp_path, capsys):
    assert run("extract", "--corpus", CORPUS) == 2  # no --out
    assert run("extract", "--corpus", str(tmp_path / "nope.jsonl"),
               "--out", str(tmp_path)) == 2
    err = capsys.readouterr().err
    assert "wikirel: error:" in err


def test_version_flag(capsys):
    assert run("--version") == 0
    assert capsys.readouterr().out.startswith("wikirel ")


def test_config_file_with_flag_overrides(tmp_path, pipeline):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(
        json.dumps({"rounds": 7, "learning_rate": 0.5, "out": str(tmp_path)}),
        encoding="utf-8",
    )
    code = run(
        "train", "--config", str(cfg_path),
        "--features", str(pipeline / "features_climate_en.csv"),
        "--rounds", "9",
    )
    assert code == 0
    report = read_json(tmp_path / "train_report.json")
    assert report["config"]["rounds"] == 9  # flag wins
    assert report["config"]["learning_rate"] == 0.5  # config survives
    assert report["n_trees"] == 9


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"bogus": 1}), encoding="utf-8")
    assert run("extract", "--config", str(cfg_path), "--out", str(tmp_path)) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_run_config_round_trip():
    cfg = RunConfig(corpus="c.jsonl", grid=(10, 20), seed=3)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# extract


def test_extract_outputs(pipeline):
    edits = (pipeline / "source_edits.jsonl").read_text(encoding="utf-8")
    lines = [json.loads(l) for l in edits.splitlines()]
    assert lines, "no source edits extracted"
    assert {"topic", "language", "page_id", "domain", "index", "action"} <= set(lines[0])
    assert all(l["topic"] == "climate" and l["language"] == "en" for l in lines)

    timelines = [
        json.loads(l)
        for l in (pipeline / "timelines.jsonl").read_text(encoding="utf-8").splitlines()
    ]
    assert all(t["perm_days"] <= t["age_days"] + 1e-12 for t in timelines)

    report = read_json(pipeline / "extract_report.json")
    assert report["tool"] == "wikirel"
    assert report["counters"]["n_datasets"] == 1
    assert report["counters"]["n_articles"] == 6
    assert report["counters"]["n_revisions"] == 120
    assert report["counters"]["n_source_edits"] == len(lines)
    assert set(report["inputs"]) == {"mini_climate_en.jsonl"}
    assert report["config"]["out"] is None  # reports are location independent


def test_no_temp_files_left_behind(pipeline):
    assert not list(pipeline.glob("*.tmp"))


# ---------------------------------------------------------------------------
# features


def test_features_output(pipeline):
    matrix = FeatureMatrix.from_csv(
        pipeline / "features_climate_en.csv", topic="climate", language="en"
    )
    assert len(matrix) >= 8
    labeled = [v for v in matrix.labels if v is not None]
    assert labeled.count(1) == 4 and labeled.count(0) == 4
    report = read_json(pipeline / "features_report.json")
    assert report["catalog_fingerprint"] == catalog_fingerprint()
    entry = report["datasets"]["climate/en"]
    assert entry["file"] == "features_climate_en.csv"
    assert entry["n_domains"] == len(matrix)
    assert entry["n_labeled"] == 8


def test_features_quantile_flag(tmp_path):
    assert run(
        "features", "--corpus", CORPUS, "--labels", LABELS,
        "--normalize", "quantile", "--out", str(tmp_path),
    ) == 0
    matrix = FeatureMatrix.from_csv(tmp_path / "features_climate_en.csv")
    assert matrix.values.min() > 0.0
    assert matrix.values.max() <= 1.0


# ---------------------------------------------------------------------------
# train / score / explain


def test_train_report(pipeline):
    report = read_json(pipeline / "train_report.json")
    assert report["class_counts"] == {"reliable": 4, "unreliable": 4}
    assert report["catalog_fingerprint"] == catalog_fingerprint()
    assert report["n_trees"] == 100


def test_score_output(pipeline, tmp_path):
    assert run(
        "score", "--ensemble", str(pipeline / "ensemble.json"),
        "--features", str(pipeline / "features_climate_en.csv"),
        "--out", str(tmp_path),
    ) == 0
    lines = (tmp_path / "scores.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "domain,margin,probability,predicted_label"
    matrix = FeatureMatrix.from_csv(pipeline / "features_climate_en.csv")
    assert len(lines) == len(matrix) + 1
    for line in lines[1:]:
        domain, margin, proba, label = line.split(",")
        assert (float(proba) >= 0.5) == (label == "1")
        assert (float(margin) >= 0.0) == (label == "1")


def test_explain_is_locally_accurate(pipeline, tmp_path):
    features = str(pipeline / "features_climate_en.csv")
    ensemble = str(pipeline / "ensemble.json")
    assert run("score", "--ensemble", ensemble, "--features", features,
               "--out", str(tmp_path)) == 0
    assert run("explain", "--ensemble", ensemble, "--features", features,
               "--out", str(tmp_path), "--top-k", "5") == 0

    margins = {}
    for line in (tmp_path / "scores.csv").read_text(encoding="utf-8").splitlines()[1:]:
        fields = line.split(",")
        margins[fields[0]] = float(fields[1])

    summary = read_json(tmp_path / "explain_summary.json")
    base = summary["base_value"]
    assert len(summary["top_features"]) == 5
    ranked = [f["mean_abs_contribution"] for f in summary["top_features"]]
    assert ranked == sorted(ranked, reverse=True)

    lines = (tmp_path / "attributions.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "domain," + ",".join(FEATURE_IDS)
    for line in lines[1:]:
        fields = line.split(",")
        contribution_sum = sum(float(v) for v in fields[1:])
        assert abs(base + contribution_sum - margins[fields[0]]) <= 1e-9


# ---------------------------------------------------------------------------
# evaluate / adapt / baseline


def test_evaluate_report(pipeline, tmp_path):
    assert run(
        "evaluate", "--features", str(pipeline / "features_climate_en.csv"),
        "--topic", "climate", "--language", "en",
        "--seed", "0", "--n-bootstrap", "50", "--compare-random",
        "--out", str(tmp_path),
    ) == 0
    report = read_json(tmp_path / "eval_report.json")
    inner = report["report"]
    assert inner["condition"] == "native"
    assert inner["test_key"] == "climate/en"
    assert inner["n_predictions"] == 8
    assert 0.0 <= inner["metrics"]["f1_macro"]["mean"] <= 1.0
    assert inner["significance"]["verdict"] in ("better", "same", "worse")


def test_adapt_pooled_via_cli(pipeline, tmp_path):
    features = str(pipeline / "features_climate_en.csv")
    assert run(
        "adapt", "--train-features", features, "--test-features", features,
        "--train-key", "climate/en", "--test-key", "climate/de",
        "--mode", "pooled", "--normalize", "quantile",
        "--n-bootstrap", "20", "--out", str(tmp_path),
    ) == 0
    report = read_json(tmp_path / "adapt_report.json")
    inner = report["report"]
    assert inner["condition"] == "pooled"
    assert inner["train_keys"] == ["climate/en"]
    assert inner["test_key"] == "climate/de"
    assert inner["n_predictions"] == 8


def test_adapt_requires_mode(pipeline, tmp_path, capsys):
    features = str(pipeline / "features_climate_en.csv")
    assert run(
        "adapt", "--train-features", features, "--test-features", features,
        "--out", str(tmp_path),
    ) == 2
    assert "mode" in capsys.readouterr().err


def test_baseline_runs_are_byte_identical(pipeline, tmp_path):
    features = str(pipeline / "features_climate_en.csv")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert run(
            "baseline", "--features", features, "--seed", "5",
            "--match-priors", "--out", str(out),
        ) == 0
    bytes_a = (out_a / "baseline_report.json").read_bytes()
    assert bytes_a == (out_b / "baseline_report.json").read_bytes()
    report = read_json(out_a / "baseline_report.json")
    assert report["baseline"]["match_priors"] is True
    assert report["baseline"]["n_domains"] == 8
    assert "f1_macro" in report["baseline"]["metrics"]


# ---------------------------------------------------------------------------
# experiment scaling


def test_scaling_experiment_cli(tmp_path):
    assert run(
        "experiment", "scaling", "--corpus", CORPUS, "--labels", LABELS,
        "--grid", "20,40,100000", "--repeats", "2", "--rounds", "10",
        "--seed", "1", "--out", str(tmp_path),
    ) == 0
    report = read_json(tmp_path / "scaling_curve.json")
    points = report["curve"]["points"]
    assert [p["n_revisions"] for p in points] == [20, 40, 100000]
    assert points[-1]["n_runs"] == 0 and "skipped" in points[-1]["note"]
    csv_lines = (tmp_path / "scaling_curve.csv").read_text(encoding="utf-8").splitlines()
    assert csv_lines[0] == "n_revisions,f1_mean,f1_std,n_runs,note"
    assert len(csv_lines) == 4


def test_scaling_cutoff_and_grid_from_config(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(
        json.dumps({
            "corpus": CORPUS, "labels": LABELS, "grid": [15, 30],
            "repeats": 2, "rounds": 10, "cutoff": "2021-12-31",
            "out": str(tmp_path),
        }),
        encoding="utf-8",
    )
    assert run("experiment", "scaling", "--config", str(cfg_path)) == 0
    report = read_json(tmp_path / "scaling_curve.json")
    assert report["curve"]["cutoff"] == "2021-12-31T23:59:59Z"
    assert [p["n_revisions"] for p in report["curve"]["points"]] == [15, 30]
    assert report["config"]["corpus"] == "mini_climate_en.jsonl"
