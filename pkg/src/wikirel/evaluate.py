"""Metrics, validation protocols, significance tests, and the scaling experiment.

All sampling (bootstrap resamples, random baselines, revision subsampling)
derives from ``random.Random(...).random()`` seeded through :func:`subseed`.
That method's stream is the one primitive the stdlib documents as stable
across versions, so reports are reproducible byte-for-byte from (seed,
inputs); distribution-level helpers like randrange carry no such guarantee
and are avoided.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import random
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from .boost import TrainConfig, fit_ensemble, predict_proba
from .corpus import AgeTotals, Dataset, days_between
from .extract import UrlCanonicalizer, diff_to_source_edits, merge_consecutive
from .features import FeatureMatrix, assemble_matrix, quantile_normalize
from .labels import LabelSet
from .psl import SuffixRules
from .timeline import build_timeline

METRIC_NAMES = (
    "f1_macro",
    "f1_reliable",
    "f1_unreliable",
    "precision_reliable",
    "precision_unreliable",
    "recall_reliable",
    "recall_unreliable",
)


class DataError(ValueError):
    """Input data cannot support the requested computation."""


def subseed(master: int, *parts: object) -> int:
    """Deterministic sub-seed derived from the master seed and a label path."""
    text = repr((int(master),) + tuple(parts))
    return int.from_bytes(hashlib.sha256(text.encode("ascii")).digest()[:8], "big")


def _rand_below(rnd: random.Random, n: int) -> int:
    """Uniform index in [0, n) built on the stable random() stream."""
    value = int(rnd.random() * n)
    return n - 1 if value >= n else value


def _sample_without_replacement(rnd: random.Random, n: int, k: int) -> list[int]:
    """k distinct indices from range(n), via partial Fisher-Yates, sorted."""
    items = list(range(n))
    for i in range(k):
        j = i + _rand_below(rnd, n - i)
        items[i], items[j] = items[j], items[i]
    return sorted(items[:k])


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """One probability per evaluated domain, with the true label."""

    domains: tuple[str, ...]
    y_true: np.ndarray
    proba: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.domains) == len(self.y_true) == len(self.proba)):
            raise ValueError("domains, labels, and probabilities must align")
        if len(self.proba) and not ((self.proba >= 0) & (self.proba <= 1)).all():
            raise ValueError("probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.domains)

    @property
    def y_pred(self) -> np.ndarray:
        """Predicted labels at the fixed 0.5 probability threshold."""
        return (self.proba >= 0.5).astype(np.int64)


def metrics_from_labels(y_true: np.ndarray, y_pred: np.ndarray) -> dict[str, float]:
    """Per-class precision/recall/F1 plus macro F1 from confusion counts.

    Reliable is class 1, unreliable class 0. Any ratio with a zero denominator
    is 0, including F1 when precision + recall is 0. Each score is a single
    division of exact integer counts (F1 as 2tp/(2tp+fp+fn)), so the floats
    are the correctly rounded values of the underlying rationals.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    out: dict[str, float] = {}
    f1s = {}
    for cls, name in ((1, "reliable"), (0, "unreliable")):
        tp = int(np.sum((y_pred == cls) & (y_true == cls)))
        fp = int(np.sum((y_pred == cls) & (y_true != cls)))
        fn = int(np.sum((y_pred != cls) & (y_true == cls)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0
        out[f"precision_{name}"] = precision
        out[f"recall_{name}"] = recall
        out[f"f1_{name}"] = f1
        f1s[cls] = f1
    out["f1_macro"] = (f1s[0] + f1s[1]) / 2.0
    return out


def f1_macro(predictions: PredictionSet) -> float:
    if len(predictions) == 0:
        raise ValueError("empty prediction set")
    return metrics_from_labels(predictions.y_true, predictions.y_pred)["f1_macro"]


def loo_predict(X: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None) -> np.ndarray:
    """Held-out probability per row; class weights are recomputed per fold."""
    if cfg is None:
        cfg = TrainConfig()
    n = X.shape[0]
    if n < 2:
        raise DataError("leave-one-out needs at least two labeled rows")
    probas = np.empty(n, dtype=np.float64)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        y_train = y[keep]
        if len(np.unique(y_train)) < 2:
            raise DataError(f"fold {i}: training labels are single-class")
        ensemble = fit_ensemble(X[keep], y_train, cfg)
        probas[i] = predict_proba(ensemble, X[i].reshape(1, -1))[0]
        keep[i] = True
    return probas


def loo_validate(matrix: FeatureMatrix, cfg: TrainConfig | None = None) -> PredictionSet:
    """One held-out prediction per labeled domain of the matrix."""
    X, y, domains = matrix.labeled_rows()
    if X.shape[0] == 0:
        raise DataError("matrix has no labeled rows")
    probas = loo_predict(X, y, cfg)
    return PredictionSet(domains=domains, y_true=y, proba=probas)


@dataclass(frozen=True)
class BootstrapResult:
    n: int
    seed: int
    means: Mapping[str, float]
    stds: Mapping[str, float]
    replicates: Mapping[str, np.ndarray] = field(repr=False, default_factory=dict)


def bootstrap_metrics(
    predictions: PredictionSet, n: int = 100, seed: int = 0
) -> BootstrapResult:
    """Resample (prediction, label) pairs with replacement, recompute metrics n times."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = len(predictions)
    if size == 0:
        raise ValueError("empty prediction set")
    rnd = random.Random(subseed(seed, "bootstrap"))
    y_true = predictions.y_true
    y_pred = predictions.y_pred
    replicates: dict[str, list[float]] = {name: [] for name in METRIC_NAMES}
    for _ in range(n):
        idx = [_rand_below(rnd, size) for _ in range(size)]
        resampled = metrics_from_labels(y_true[idx], y_pred[idx])
        for name in METRIC_NAMES:
            replicates[name].append(resampled[name])
    arrays = {name: np.array(vals) for name, vals in replicates.items()}
    return BootstrapResult(
        n=n,
        seed=seed,
        means={name: float(a.mean()) for name, a in arrays.items()},
        stds={name: float(a.std()) for name, a in arrays.items()},
        replicates=arrays,
    )


def random_baseline(
    y_true: Sequence[int] | np.ndarray,
    n: int = 100,
    seed: int = 0,
    match_priors: bool = False,
    domains: Sequence[str] | None = None,
) -> tuple[PredictionSet, BootstrapResult]:
    """One uniform (or prior-matched) random assignment, bootstrapped like a model."""
    y_true = np.asarray(y_true, dtype=np.int64)
    if len(y_true) == 0:
        raise ValueError("no labels")
    q = float(y_true.mean()) if match_priors else 0.5
    rnd = random.Random(subseed(seed, "baseline"))
    proba = np.array([1.0 if rnd.random() < q else 0.0 for _ in y_true])
    if domains is None:
        domains = tuple(f"domain_{i}" for i in range(len(y_true)))
    predictions = PredictionSet(domains=tuple(domains), y_true=y_true, proba=proba)
    return predictions, bootstrap_metrics(predictions, n=n, seed=seed)


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def _exact_p_greater(pooled: list[float], n1: int, observed_u: float) -> float:
    """Fraction of group assignments with U at least as large as observed."""
    indices = range(len(pooled))
    total = 0
    at_least = 0
    for chosen in itertools.combinations(indices, n1):
        chosen_set = set(chosen)
        a = [pooled[i] for i in chosen]
        b = [pooled[i] for i in indices if i not in chosen_set]
        total += 1
        if _u_statistic(a, b) >= observed_u:
            at_least += 1
    return at_least / total


def _normal_p_greater(pooled: list[float], n1: int, observed_u: float) -> float:
    """Tie-corrected normal approximation with continuity correction."""
    n2 = len(pooled) - n1
    total = len(pooled)
    mean = n1 * n2 / 2.0
    tie_counts: dict[float, int] = {}
    for value in pooled:
        tie_counts[value] = tie_counts.get(value, 0) + 1
    tie_term = sum(t**3 - t for t in tie_counts.values())
    variance = (n1 * n2 / 12.0) * ((total + 1) - tie_term / (total * (total - 1)))
    if variance <= 0:
        return 0.5 if observed_u == mean else (0.0 if observed_u > mean else 1.0)
    z = (observed_u - mean - 0.5) / math.sqrt(variance)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


EXACT_LIMIT = 20  # pooled size up to which the permutation distribution is enumerated


def mann_whitney(
    a: Sequence[float], b: Sequence[float], alternative: str = "greater"
) -> tuple[float, float]:
    """U statistic and one-sided p for "a tends larger than b" (or "less").

    The p-value comes from exact enumeration of all group assignments when the
    pooled size is at most 20, and from the tie-corrected normal approximation
    above that.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    if alternative == "less":
        u_ba, p = mann_whitney(b, a, "greater")
        return len(a) * len(b) - u_ba, p
    if alternative != "greater":
        raise ValueError(f"unknown alternative {alternative!r}")
    u = _u_statistic(a, b)
    pooled = a + b
    if len(pooled) <= EXACT_LIMIT:
        p = _exact_p_greater(pooled, len(a), u)
    else:
        p = _normal_p_greater(pooled, len(a), u)
    return u, p


def significance_verdict(
    model_sample: Sequence[float],
    reference_sample: Sequence[float],
    alpha: float = 0.05,
    m_comparisons: int = 1,
) -> dict:
    """better/same/worse against a Bonferroni-corrected one-sided level."""
    corrected = alpha / m_comparisons
    u_greater, p_greater = mann_whitney(model_sample, reference_sample, "greater")
    _, p_less = mann_whitney(model_sample, reference_sample, "less")
    if p_greater < corrected:
        verdict = "better"
    elif p_less < corrected:
        verdict = "worse"
    else:
        verdict = "same"
    return {
        "u_statistic": u_greater,
        "p_value": p_greater,
        "p_value_less": p_less,
        "alpha": alpha,
        "m_comparisons": m_comparisons,
        "corrected_alpha": corrected,
        "verdict": verdict,
    }


@dataclass(frozen=True)
class EvalReport:
    """Per-condition evaluation summary with bootstrap uncertainty."""

    condition: str  # native | cross-language | cross-topic | mixed | pooled
    train_keys: tuple[tuple[str, str], ...]
    test_key: tuple[str, str]
    n_bootstrap: int
    seed: int
    metric_means: Mapping[str, float]
    metric_stds: Mapping[str, float]
    n_predictions: int
    significance: Mapping[str, object] | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name, mean in self.metric_means.items():
            if not 0.0 <= mean <= 1.0:
                raise ValueError(f"metric {name} mean {mean} outside [0, 1]")
        if any(s < 0 for s in self.metric_stds.values()):
            raise ValueError("metric std must be >= 0")

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "train_keys": ["/".join(k) for k in self.train_keys],
            "test_key": "/".join(self.test_key),
            "n_bootstrap": self.n_bootstrap,
            "seed": self.seed,
            "metrics": {
                name: {"mean": self.metric_means[name], "std": self.metric_stds[name]}
                for name in sorted(self.metric_means)
            },
            "n_predictions": self.n_predictions,
            "significance": dict(self.significance) if self.significance else None,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        def split_key(text: str) -> tuple[str, str]:
            topic, _, language = text.partition("/")
            return (topic, language)

        metrics = obj["metrics"]
        return cls(
            condition=obj["condition"],
            train_keys=tuple(split_key(k) for k in obj["train_keys"]),
            test_key=split_key(obj["test_key"]),
            n_bootstrap=obj["n_bootstrap"],
            seed=obj["seed"],
            metric_means={k: v["mean"] for k, v in metrics.items()},
            metric_stds={k: v["std"] for k, v in metrics.items()},
            n_predictions=obj["n_predictions"],
            significance=obj.get("significance"),
            notes=tuple(obj.get("notes", ())),
        )


def _report_from_predictions(
    condition: str,
    train_keys: Sequence[tuple[str, str]],
    test_key: tuple[str, str],
    predictions: PredictionSet,
    n_bootstrap: int,
    seed: int,
    compare_random: bool,
    m_comparisons: int,
    notes: Sequence[str] = (),
) -> EvalReport:
    boot = bootstrap_metrics(predictions, n=n_bootstrap, seed=seed)
    significance = None
    if compare_random:
        _, baseline_boot = random_baseline(
            predictions.y_true, n=n_bootstrap, seed=subseed(seed, "random-reference")
        )
        significance = significance_verdict(
            boot.replicates["f1_macro"],
            baseline_boot.replicates["f1_macro"],
            m_comparisons=m_comparisons,
        )
    return EvalReport(
        condition=condition,
        train_keys=tuple(train_keys),
        test_key=test_key,
        n_bootstrap=n_bootstrap,
        seed=seed,
        metric_means=boot.means,
        metric_stds=boot.stds,
        n_predictions=len(predictions),
        significance=significance,
        notes=tuple(notes),
    )


def evaluate_native(
    matrix: FeatureMatrix,
    cfg: TrainConfig | None = None,
    n_bootstrap: int = 100,
    seed: int = 0,
    compare_random: bool = False,
    m_comparisons: int = 1,
) -> EvalReport:
    """Native leave-one-out evaluation of one labeled dataset."""
    if cfg is None:
        cfg = TrainConfig()
    predictions = loo_validate(matrix, cfg)
    return _report_from_predictions(
        "native", [matrix.key], matrix.key, predictions,
        n_bootstrap, seed, compare_random, m_comparisons,
    )


def _require_two_per_class(y: np.ndarray, where: str, min_per_class: int = 2) -> None:
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos < min_per_class or n_neg < min_per_class:
        raise DataError(
            f"{where}: needs >= {min_per_class} labeled domains per class "
            f"(got {n_pos} reliable, {n_neg} unreliable)"
        )


def adapt(
    train: FeatureMatrix | Sequence[FeatureMatrix],
    test: FeatureMatrix,
    mode: str,
    normalize: str = "none",
    cfg: TrainConfig | None = None,
    n_bootstrap: int = 100,
    seed: int = 0,
    compare_random: bool = False,
    m_comparisons: int = 1,
    min_per_class: int = 2,
    remove_test_only: bool = False,
) -> EvalReport:
    """Cross-language/cross-topic transfer and mixed/pooled LOO evaluation.

    Cross modes train once on the training matrix and score every labeled test
    row. Mixed and pooled modes leave one test-dataset domain out at a time
    and train on the pooled remainder; by default the held-out domain's rows
    are removed from every pooled dataset (the same domain carries the same
    label everywhere), while ``remove_test_only=True`` removes only the test
    dataset's row. With ``normalize="quantile"`` every dataset is rank
    normalized independently before any pooling.
    """
    if cfg is None:
        cfg = TrainConfig()
    if normalize not in ("none", "quantile"):
        raise ValueError(f"unknown normalization {normalize!r}")
    train_list = [train] if isinstance(train, FeatureMatrix) else list(train)
    if not train_list:
        raise ValueError("no training matrices")
    if normalize == "quantile":
        train_list = [quantile_normalize(m) for m in train_list]
        test = quantile_normalize(test)

    if mode in ("cross-language", "cross-topic"):
        if len(train_list) != 1:
            raise ValueError(f"{mode} expects a single training matrix")
        source = train_list[0]
        if mode == "cross-language" and source.topic != test.topic:
            raise ValueError("cross-language transfer requires a shared topic")
        if mode == "cross-topic" and source.language != test.language:
            raise ValueError("cross-topic transfer requires a shared language")
        X_train, y_train, _ = source.labeled_rows()
        _require_two_per_class(y_train, f"training matrix {source.key}", min_per_class)
        X_test, y_test, domains = test.labeled_rows()
        if X_test.shape[0] == 0:
            raise DataError("test matrix has no labeled rows")
        ensemble = fit_ensemble(X_train, y_train, cfg)
        predictions = PredictionSet(
            domains=domains, y_true=y_test, proba=predict_proba(ensemble, X_test)
        )
        return _report_from_predictions(
            mode, [source.key], test.key, predictions,
            n_bootstrap, seed, compare_random, m_comparisons,
        )

    if mode not in ("mixed", "pooled"):
        raise ValueError(f"unknown adaptation mode {mode!r}")
    if mode == "mixed":
        for matrix in train_list:
            if matrix.topic != test.topic:
                raise ValueError("mixed pooling requires a shared topic")

    pool_X: list[np.ndarray] = []
    pool_y: list[np.ndarray] = []
    pool_domains: list[str] = []
    pool_is_test: list[bool] = []
    for matrix, is_test in [(m, False) for m in train_list] + [(test, True)]:
        X, y, domains = matrix.labeled_rows()
        pool_X.append(X)
        pool_y.append(y)
        pool_domains.extend(domains)
        pool_is_test.extend([is_test] * len(domains))
    X_all = np.concatenate(pool_X, axis=0)
    y_all = np.concatenate(pool_y, axis=0)
    domains_all = np.array(pool_domains)
    is_test_row = np.array(pool_is_test)

    _require_two_per_class(y_all, "pooled training data", min_per_class)
    test_rows = np.nonzero(is_test_row)[0]
    if test_rows.size == 0:
        raise DataError("test matrix has no labeled rows")

    probas = np.empty(test_rows.size, dtype=np.float64)
    for k, row in enumerate(test_rows):
        held_domain = domains_all[row]
        if remove_test_only:
            keep = np.ones(len(domains_all), dtype=bool)
            keep[row] = False
        else:
            keep = domains_all != held_domain
        y_fold = y_all[keep]
        if len(np.unique(y_fold)) < 2:
            raise DataError(f"fold for {held_domain}: training labels are single-class")
        ensemble = fit_ensemble(X_all[keep], y_fold, cfg)
        probas[k] = predict_proba(ensemble, X_all[row].reshape(1, -1))[0]

    predictions = PredictionSet(
        domains=tuple(domains_all[test_rows]),
        y_true=y_all[test_rows],
        proba=probas,
    )
    return _report_from_predictions(
        mode, [m.key for m in train_list], test.key, predictions,
        n_bootstrap, seed, compare_random, m_comparisons,
    )


@dataclass(frozen=True)
class ScalingPoint:
    n_revisions: int
    f1_mean: float | None
    f1_std: float | None
    n_runs: int
    note: str | None = None


@dataclass(frozen=True)
class ScalingCurve:
    points: tuple[ScalingPoint, ...]
    repeats: int
    seed: int
    cutoff: str | None
    n_available: int

    def to_dict(self) -> dict:
        return {
            "repeats": self.repeats,
            "seed": self.seed,
            "cutoff": self.cutoff,
            "n_available": self.n_available,
            "points": [
                {
                    "n_revisions": p.n_revisions,
                    "f1_mean": p.f1_mean,
                    "f1_std": p.f1_std,
                    "n_runs": p.n_runs,
                    "note": p.note,
                }
                for p in self.points
            ],
        }

    def to_csv_rows(self) -> list[list[str]]:
        rows = [["n_revisions", "f1_mean", "f1_std", "n_runs", "note"]]
        for p in self.points:
            rows.append(
                [
                    str(p.n_revisions),
                    "" if p.f1_mean is None else format(p.f1_mean, ".17g"),
                    "" if p.f1_std is None else format(p.f1_std, ".17g"),
                    str(p.n_runs),
                    p.note or "",
                ]
            )
        return rows


def log_grid(start_exp: float = 3.0, stop_exp: float = 6.75, step: float = 0.25) -> list[int]:
    """Log-regular revision counts: 10**e for e from start to stop inclusive."""
    if step <= 0:
        raise ValueError("step must be positive")
    grid = []
    k = 0
    while True:
        e = start_exp + k * step
        if e > stop_exp + 1e-9:
            break
        value = round(10**e)
        if not grid or value != grid[-1]:
            grid.append(value)
        k += 1
    return grid


def _clip_dataset(dataset: Dataset, cutoff: datetime | None) -> Dataset:
    if cutoff is None:
        return dataset
    clipped = []
    for article in dataset.articles:
        kept = tuple(r for r in article.revisions if r.timestamp <= cutoff)
        if not kept:
            continue
        clipped.append(
            replace(article, revisions=kept, retrieved_at=min(article.retrieved_at, cutoff))
        )
    if not clipped:
        raise DataError("cutoff leaves no revisions in the dataset")
    return replace(dataset, articles=tuple(clipped))


def scaling_experiment(
    dataset: Dataset,
    labels: LabelSet,
    grid: Sequence[int],
    repeats: int = 10,
    cutoff: datetime | None = None,
    cfg: TrainConfig | None = None,
    seed: int = 0,
    min_per_class: int = 2,
    rules: SuffixRules | None = None,
    redirect_map: Mapping[str, str] | None = None,
) -> ScalingCurve:
    """F1 versus corpus size: subsample merged revisions, rebuild, run LOO.

    Each (grid point, repeat) draws its own uniform sample of merged revisions
    without replacement across all articles, re-collapses adjacent same-user
    survivors, rebuilds timelines and features from the sample only, and runs
    native LOO. Points larger than the available pool are skipped with a note,
    as are repeats whose sample breaks the per-class minimum.
    """
    if list(grid) != sorted(grid) or not grid:
        raise ValueError("grid must be a non-empty ascending sequence")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if cfg is None:
        cfg = TrainConfig()
    dataset = _clip_dataset(dataset, cutoff)

    canonicalizer = UrlCanonicalizer(redirect_map)
    articles = sorted(dataset.articles, key=lambda a: a.page_id)
    merged_per_article = [merge_consecutive(a, canonicalizer, rules) for a in articles]
    pool = [
        (article_index, rev_index)
        for article_index, merged in enumerate(merged_per_article)
        for rev_index in range(len(merged))
    ]
    n_available = len(pool)

    points: list[ScalingPoint] = []
    for point_index, n_revisions in enumerate(grid):
        if n_revisions > n_available:
            points.append(
                ScalingPoint(
                    n_revisions=n_revisions,
                    f1_mean=None,
                    f1_std=None,
                    n_runs=0,
                    note=f"skipped: only {n_available} merged revisions available",
                )
            )
            continue
        scores: list[float] = []
        skipped = 0
        for repeat in range(repeats):
            rnd = random.Random(subseed(seed, "scaling", point_index, repeat))
            chosen = _sample_without_replacement(rnd, n_available, n_revisions)
            f1 = _run_sampled(
                dataset, articles, merged_per_article,
                [pool[i] for i in chosen], labels, cfg, min_per_class,
            )
            if f1 is None:
                skipped += 1
            else:
                scores.append(f1)
        note = None
        if skipped:
            note = f"{skipped} of {repeats} repeats skipped: sample below per-class minimum"
        arr = np.array(scores) if scores else None
        points.append(
            ScalingPoint(
                n_revisions=n_revisions,
                f1_mean=float(arr.mean()) if arr is not None else None,
                f1_std=float(arr.std()) if arr is not None else None,
                n_runs=len(scores),
                note=note,
            )
        )
    return ScalingCurve(
        points=tuple(points),
        repeats=repeats,
        seed=seed,
        cutoff=None if cutoff is None else cutoff.strftime("%Y-%m-%dT%H:%M:%SZ"),
        n_available=n_available,
    )


def _run_sampled(
    dataset: Dataset,
    articles,
    merged_per_article,
    sample: list[tuple[int, int]],
    labels: LabelSet,
    cfg: TrainConfig,
    min_per_class: int,
) -> float | None:
    """LOO macro F1 of one revision sample, or None when labels fall short."""
    by_article: dict[int, list[int]] = {}
    for article_index, rev_index in sample:
        by_article.setdefault(article_index, []).append(rev_index)

    page_ids: list[int] = []
    timelines = {}
    total_days = 0.0
    total_revs = 0
    users: set[str] = set()
    for article_index in sorted(by_article):
        article = articles[article_index]
        merged_full = merged_per_article[article_index]
        kept = [merged_full[i] for i in sorted(by_article[article_index])]
        # Re-collapse adjacent same-user survivors: the later revision's state
        # stands, preserving the adjacent-users-differ invariant.
        collapsed = []
        for rev in kept:
            if collapsed and collapsed[-1].user == rev.user:
                collapsed[-1] = rev
            else:
                collapsed.append(rev)
        reindexed = [replace(rev, index=i) for i, rev in enumerate(collapsed)]
        edits = diff_to_source_edits(reindexed, article.page_id)
        timelines[article.page_id] = build_timeline(reindexed, edits, article.retrieved_at)
        page_ids.append(article.page_id)
        total_days += days_between(reindexed[0].timestamp, article.retrieved_at)
        total_revs += len(reindexed)
        users.update(rev.user for rev in reindexed)

    matrix = assemble_matrix(
        topic=dataset.topic,
        language=dataset.language,
        page_ids=page_ids,
        timelines=timelines,
        totals=AgeTotals(total_days, total_revs, len(users)),
        n_articles=len(page_ids),
    )
    matrix = matrix.with_labels(labels.binary)
    _, y, _ = matrix.labeled_rows()
    if int(np.sum(y == 1)) < min_per_class or int(np.sum(y == 0)) < min_per_class:
        return None
    predictions = loo_validate(matrix, cfg)
    return f1_macro(predictions)
