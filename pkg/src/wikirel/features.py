"""The per-domain feature catalog and FeatureMatrix assembly.

Fifty features in three families. All article-level aggregations use the
arithmetic mean; distinct-user counts deduplicate by user name across the
whole dataset; every ratio with a zero denominator defaults to 0 so matrices
stay dense.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .corpus import AgeTotals, Dataset, dataset_age_totals
from .extract import SourceEdit, UrlCanonicalizer, analyze_dataset
from .psl import SuffixRules
from .timeline import DomainTimeline, build_dataset_timelines

POPULARITY = "popularity"
PERMANENCE = "permanence"
USER = "user"


@dataclass(frozen=True)
class FeatureSpec:
    """Descriptor of one catalog column."""

    id: str
    family: str
    unit: str  # count | days | revisions | ratio
    normalization: str  # raw | dataset | per_article
    scope: str  # all_events | start_end | none


def _user_scope(prefix_add: str, prefix_rem: str, scope: str) -> list[FeatureSpec]:
    """The 16 user features of one event scope, in fixed order."""
    specs = []
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_users", USER, "count", "raw", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_reg_users", USER, "count", "raw", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_users_frac", USER, "ratio", "dataset", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_reg_users_frac", USER, "ratio", "dataset", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_users_per_article", USER, "count", "per_article", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_reg_users_per_article", USER, "count", "per_article", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_reg_ratio", USER, "ratio", "raw", scope))
    for prefix in (prefix_add, prefix_rem):
        specs.append(FeatureSpec(f"{prefix}_reg_event_share", USER, "ratio", "raw", scope))
    return specs


CATALOG: tuple[FeatureSpec, ...] = tuple(
    [
        FeatureSpec("n_articles", POPULARITY, "count", "raw", "none"),
        FeatureSpec("n_articles_frac", POPULARITY, "ratio", "dataset", "none"),
        FeatureSpec("curr_n_articles", POPULARITY, "count", "raw", "none"),
        FeatureSpec("curr_n_articles_frac", POPULARITY, "ratio", "dataset", "none"),
        FeatureSpec("perm_days_sum", PERMANENCE, "days", "raw", "none"),
        FeatureSpec("perm_revs_sum", PERMANENCE, "revisions", "raw", "none"),
        FeatureSpec("curr_perm_days_sum", PERMANENCE, "days", "raw", "none"),
        FeatureSpec("curr_perm_revs_sum", PERMANENCE, "revisions", "raw", "none"),
        FeatureSpec("perm_days_sum_frac", PERMANENCE, "ratio", "dataset", "none"),
        FeatureSpec("perm_revs_sum_frac", PERMANENCE, "ratio", "dataset", "none"),
        FeatureSpec("perm_days_mean", PERMANENCE, "days", "per_article", "none"),
        FeatureSpec("perm_revs_mean", PERMANENCE, "revisions", "per_article", "none"),
        FeatureSpec("self_perm_days_mean", PERMANENCE, "ratio", "per_article", "none"),
        FeatureSpec("self_perm_revs_mean", PERMANENCE, "ratio", "per_article", "none"),
        FeatureSpec("age_days_sum", PERMANENCE, "days", "raw", "none"),
        FeatureSpec("age_revs_sum", PERMANENCE, "revisions", "raw", "none"),
        FeatureSpec("age_days_mean", PERMANENCE, "days", "per_article", "none"),
        FeatureSpec("age_revs_mean", PERMANENCE, "revisions", "per_article", "none"),
    ]
    + _user_scope("add", "rem", "all_events")
    + _user_scope("first_add", "last_rem", "start_end")
)

FEATURE_IDS: tuple[str, ...] = tuple(spec.id for spec in CATALOG)
FEATURE_INDEX: dict[str, int] = {spec.id: i for i, spec in enumerate(CATALOG)}

assert len(CATALOG) == 50 and len(FEATURE_INDEX) == 50


def catalog_fingerprint() -> str:
    """Stable digest of the catalog; models refuse matrices built differently."""
    text = "\n".join(
        f"{s.id}|{s.family}|{s.unit}|{s.normalization}|{s.scope}" for s in CATALOG
    )
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows = domains of one dataset, columns = the catalog, optional labels."""

    topic: str
    language: str
    domains: tuple[str, ...]
    values: np.ndarray  # shape (n_domains, len(CATALOG)), float64
    labels: tuple[int | None, ...] | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.domains), len(CATALOG)):
            raise ValueError(
                f"value grid shape {self.values.shape} does not match "
                f"{len(self.domains)} domains x {len(CATALOG)} features"
            )
        if self.labels is not None and len(self.labels) != len(self.domains):
            raise ValueError("label column length mismatch")

    @property
    def key(self) -> tuple[str, str]:
        return (self.topic, self.language)

    def __len__(self) -> int:
        return len(self.domains)

    def row(self, domain: str) -> np.ndarray:
        return self.values[self.domains.index(domain)]

    def with_labels(self, binary: Mapping[str, str]) -> "FeatureMatrix":
        """Attach labels from a domain -> reliable/unreliable map; others stay None."""
        labels = tuple(
            {"reliable": 1, "unreliable": 0}.get(binary.get(d)) for d in self.domains
        )
        return replace(self, labels=labels)

    def labeled_rows(self) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
        """(X, y, domains) restricted to rows with a known label."""
        if self.labels is None:
            return self.values[:0], np.zeros(0, dtype=np.int64), ()
        keep = [i for i, label in enumerate(self.labels) if label is not None]
        X = self.values[keep]
        y = np.array([self.labels[i] for i in keep], dtype=np.int64)
        return X, y, tuple(self.domains[i] for i in keep)

    def to_csv(self, path: str | Path) -> None:
        """First column domain, catalog columns, last column label (1/0/empty)."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["domain", *FEATURE_IDS, "label"])
            for i, domain in enumerate(self.domains):
                label = "" if self.labels is None or self.labels[i] is None else str(self.labels[i])
                writer.writerow([domain, *(format(v, ".17g") for v in self.values[i]), label])

    @classmethod
    def from_csv(cls, path: str | Path, topic: str = "", language: str = "") -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != ["domain", *FEATURE_IDS, "label"]:
                raise ValueError(f"{path}: header does not match the feature catalog")
            domains: list[str] = []
            rows: list[list[float]] = []
            labels: list[int | None] = []
            for record in reader:
                if len(record) != len(CATALOG) + 2:
                    raise ValueError(f"{path}: row with {len(record)} fields")
                domains.append(record[0])
                rows.append([float(v) for v in record[1:-1]])
                labels.append(int(record[-1]) if record[-1] != "" else None)
        values = np.array(rows, dtype=np.float64).reshape(len(domains), len(CATALOG))
        has_labels = any(label is not None for label in labels)
        return cls(
            topic=topic,
            language=language,
            domains=tuple(domains),
            values=values,
            labels=tuple(labels) if has_labels else None,
        )


def _distinct(edits: Iterable[SourceEdit], registered_only: bool = False) -> set[str]:
    return {e.user for e in edits if e.registered or not registered_only}


def _mean(values: Sequence[float]) -> float:
    return float(sum(values) / len(values)) if values else 0.0


def _ratio(numerator: float, denominator: float) -> float:
    return float(numerator / denominator) if denominator else 0.0


def _user_block(
    add_events: list[SourceEdit],
    rem_events: list[SourceEdit],
    per_article_add: list[set[str]],
    per_article_rem: list[set[str]],
    per_article_add_reg: list[set[str]],
    per_article_rem_reg: list[set[str]],
    total_users: int,
) -> list[float]:
    """The 16 user features of one scope, in catalog order."""
    add_users = _distinct(add_events)
    rem_users = _distinct(rem_events)
    add_reg = _distinct(add_events, registered_only=True)
    rem_reg = _distinct(rem_events, registered_only=True)
    return [
        float(len(add_users)),
        float(len(rem_users)),
        float(len(add_reg)),
        float(len(rem_reg)),
        _ratio(len(add_users), total_users),
        _ratio(len(rem_users), total_users),
        _ratio(len(add_reg), total_users),
        _ratio(len(rem_reg), total_users),
        _mean([len(s) for s in per_article_add]),
        _mean([len(s) for s in per_article_rem]),
        _mean([len(s) for s in per_article_add_reg]),
        _mean([len(s) for s in per_article_rem_reg]),
        _ratio(len(add_reg), len(add_users)),
        _ratio(len(rem_reg), len(rem_users)),
        _ratio(sum(1 for e in add_events if e.registered), len(add_events)),
        _ratio(sum(1 for e in rem_events if e.registered), len(rem_events)),
    ]


def compute_features(
    dataset: Dataset,
    timelines: Mapping[int, Mapping[str, DomainTimeline]],
) -> FeatureMatrix:
    """One row per domain appearing in any article timeline of the dataset.

    Articles are reduced in sorted page-id order, so results are independent
    of the iteration order of ``timelines``.
    """
    page_ids = sorted(a.page_id for a in dataset.articles)
    missing = [p for p in page_ids if p not in timelines]
    if missing:
        raise ValueError(f"timelines missing for pages {missing}")
    return assemble_matrix(
        topic=dataset.topic,
        language=dataset.language,
        page_ids=page_ids,
        timelines=timelines,
        totals=dataset_age_totals(dataset),
        n_articles=len(dataset.articles),
    )


def assemble_matrix(
    topic: str,
    language: str,
    page_ids: Sequence[int],
    timelines: Mapping[int, Mapping[str, DomainTimeline]],
    totals: AgeTotals,
    n_articles: int,
) -> FeatureMatrix:
    """Catalog computation from prebuilt timelines and dataset totals.

    This is the reduction :func:`compute_features` performs; experiments that
    rebuild sampled sub-histories call it with their own totals.
    """
    n_articles_total = n_articles
    page_ids = sorted(page_ids)

    domains = sorted({d for p in page_ids for d in timelines[p]})
    grid = np.zeros((len(domains), len(CATALOG)), dtype=np.float64)

    for row, domain in enumerate(domains):
        articles = [timelines[p][domain] for p in page_ids if domain in timelines[p]]
        current = [t for t in articles if t.currently_present]

        add_events = [e for t in articles for e in t.adds]
        rem_events = [e for t in articles for e in t.removes]
        first_adds = [e for e in add_events if e.first_add]
        last_rems = [e for e in rem_events if e.last_remove]

        values: list[float] = [
            float(len(articles)),
            _ratio(len(articles), n_articles_total),
            float(len(current)),
            _ratio(len(current), n_articles_total),
            sum(t.perm_days for t in articles),
            float(sum(t.perm_revs for t in articles)),
            sum(t.perm_days for t in current),
            float(sum(t.perm_revs for t in current)),
            _ratio(sum(t.perm_days for t in articles), totals.article_days),
            _ratio(sum(t.perm_revs for t in articles), totals.article_revisions),
            _mean([t.perm_days for t in articles]),
            _mean([t.perm_revs for t in articles]),
            _mean([t.self_perm_days() for t in articles]),
            _mean([t.self_perm_revs() for t in articles]),
            sum(t.age_days for t in articles),
            float(sum(t.age_revs for t in articles)),
            _mean([t.age_days for t in articles]),
            _mean([t.age_revs for t in articles]),
        ]
        values += _user_block(
            add_events,
            rem_events,
            [_distinct(t.adds) for t in articles if t.adds],
            [_distinct(t.removes) for t in articles if t.removes],
            [_distinct(t.adds, True) for t in articles if t.adds],
            [_distinct(t.removes, True) for t in articles if t.removes],
            totals.unique_users,
        )
        first_by_article = [[e for e in t.adds if e.first_add] for t in articles]
        last_by_article = [[e for e in t.removes if e.last_remove] for t in articles]
        values += _user_block(
            first_adds,
            last_rems,
            [_distinct(es) for es in first_by_article if es],
            [_distinct(es) for es in last_by_article if es],
            [_distinct(es, True) for es in first_by_article if es],
            [_distinct(es, True) for es in last_by_article if es],
            totals.unique_users,
        )
        grid[row] = values

    return FeatureMatrix(
        topic=topic,
        language=language,
        domains=tuple(domains),
        values=grid,
    )


def featurize(
    dataset: Dataset,
    canonicalizer: UrlCanonicalizer | None = None,
    rules: SuffixRules | None = None,
) -> FeatureMatrix:
    """Full extractor -> timeline -> features run over one dataset."""
    analyzed = analyze_dataset(dataset, canonicalizer, rules)
    timelines = build_dataset_timelines(analyzed)
    return compute_features(dataset, timelines)


def _average_ranks(column: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean rank of their block."""
    _, inverse, counts = np.unique(column, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    mean_ranks = starts + (counts + 1) / 2.0
    return mean_ranks[inverse]


def rank_transform(values: np.ndarray) -> np.ndarray:
    """Column-wise average ranks scaled to (0, 1] by the row count."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError("need a 2-d array with at least one row")
    out = np.empty_like(values)
    for j in range(values.shape[1]):
        out[:, j] = _average_ranks(values[:, j]) / values.shape[0]
    return out


def quantile_normalize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Per-column quantile rank normalization over this matrix's rows.

    Applied to each dataset independently, before any pooling. Idempotent up
    to tie structure and invariant under strictly increasing per-column
    transforms of the input.
    """
    if len(matrix) < 1:
        raise ValueError("cannot quantile-normalize an empty matrix")
    return replace(matrix, values=rank_transform(matrix.values))


class QuantileRankNormalizer(BaseEstimator, TransformerMixin):
    """Stateless transformer wrapping :func:`rank_transform`.

    Ranks are computed within each transformed matrix (per-dataset semantics),
    so ``fit`` only validates input; it learns nothing.
    """

    def fit(self, X, y=None):
        check_array(X)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = check_array(X)
        return rank_transform(X)
