"""Reliability ground truth: category mappings, dataset filtering, language tiers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Dataset
from .extract import analyze_dataset
from .psl import SuffixRules, bundled

RELIABLE = "reliable"
UNRELIABLE = "unreliable"
EXCLUDED = "excluded"

PERENNIAL_CATEGORIES = {
    "generally reliable": RELIABLE,
    "no consensus": EXCLUDED,
    "generally unreliable": UNRELIABLE,
    "deprecated": UNRELIABLE,
    "blacklisted": UNRELIABLE,
}

MBFC_RELIABLE = {"very high", "high"}
MBFC_UNRELIABLE = {"low", "very low"}


def map_perennial(category: str) -> str:
    """Perennial category to binary label; no-consensus domains are excluded."""
    try:
        return PERENNIAL_CATEGORIES[category.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown perennial category {category!r}") from None


def map_mbfc(credibility: str) -> str:
    """MBFC credibility to binary label; unknown or middling ratings are excluded."""
    value = credibility.strip().lower()
    if value in MBFC_RELIABLE:
        return RELIABLE
    if value in MBFC_UNRELIABLE:
        return UNRELIABLE
    return EXCLUDED


def _map_custom(category: str) -> str:
    value = category.strip().lower()
    if value not in (RELIABLE, UNRELIABLE, EXCLUDED):
        raise ValueError(f"custom labels must be reliable/unreliable/excluded, got {category!r}")
    return value


_MAPPERS = {"perennial": map_perennial, "mbfc": map_mbfc, "custom": _map_custom}


@dataclass(frozen=True)
class LabelSet:
    """Canonical-domain ground truth after category mapping."""

    source: str
    snapshot_date: str | None
    categories: Mapping[str, str]
    binary: Mapping[str, str]  # domain -> reliable | unreliable
    excluded: frozenset[str]

    def count_classes(self, domains: Iterable[str]) -> tuple[int, int]:
        """(reliable, unreliable) label counts among the given domains."""
        n_rel = n_unrel = 0
        for domain in set(domains):
            label = self.binary.get(domain)
            if label == RELIABLE:
                n_rel += 1
            elif label == UNRELIABLE:
                n_unrel += 1
        return n_rel, n_unrel

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple[str, str]],
        source: str = "custom",
        snapshot_date: str | None = None,
        rules: SuffixRules | None = None,
    ) -> "LabelSet":
        if source not in _MAPPERS:
            raise ValueError(f"unknown label source {source!r}")
        if rules is None:
            rules = bundled()
        mapper = _MAPPERS[source]
        categories: dict[str, str] = {}
        binary: dict[str, str] = {}
        excluded: set[str] = set()
        for raw_domain, category in pairs:
            domain = rules.registrable_domain(raw_domain.strip().lower())
            categories[domain] = category
            label = mapper(category)
            if label == EXCLUDED:
                excluded.add(domain)
                binary.pop(domain, None)
            else:
                binary[domain] = label
                excluded.discard(domain)
        return cls(source, snapshot_date, categories, binary, frozenset(excluded))


def load_label_csv(
    path: str | Path,
    source: str = "perennial",
    rules: SuffixRules | None = None,
) -> LabelSet:
    """Read a ``domain,category`` CSV with an optional ``# snapshot-date:`` comment."""
    snapshot_date: str | None = None
    pairs: list[tuple[str, str]] = []
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.lower().startswith("snapshot-date:"):
                snapshot_date = body.split(":", 1)[1].strip()
            continue
        fields = stripped.split(",")
        if len(fields) != 2:
            raise ValueError(f"{path}:{number}: expected domain,category")
        pairs.append((fields[0], fields[1]))
    return LabelSet.from_pairs(pairs, source=source, snapshot_date=snapshot_date, rules=rules)


def dataset_domains(dataset: Dataset, rules: SuffixRules | None = None) -> set[str]:
    """All domains with at least one source edit in the dataset."""
    analyzed = analyze_dataset(dataset, rules=rules)
    return {edit.domain for art in analyzed.values() for edit in art.edits}


def filter_datasets(
    datasets: Iterable[Dataset],
    labels: LabelSet,
    min_per_class: int = 2,
    domains_by_key: Mapping[tuple[str, str], set[str]] | None = None,
) -> list[Dataset]:
    """Keep datasets with at least min_per_class labeled domains of each class.

    ``domains_by_key`` short-circuits extraction when the caller already knows
    each dataset's cited domains.
    """
    if min_per_class < 1:
        raise ValueError("min_per_class must be >= 1")
    kept = []
    for dataset in datasets:
        if domains_by_key is not None and dataset.key in domains_by_key:
            domains = domains_by_key[dataset.key]
        else:
            domains = dataset_domains(dataset)
        n_rel, n_unrel = labels.count_classes(domains)
        if n_rel >= min_per_class and n_unrel >= min_per_class:
            kept.append(dataset)
    return kept


@dataclass(frozen=True)
class LanguageTier:
    language: str
    active_users: int
    tier: str  # high | mid | low


def assign_tiers(counts: Mapping[str, int]) -> list[LanguageTier]:
    """5%/25%/70% resourcefulness split by active-user count.

    Languages sort descending by count (ties broken by language code); the
    first ceil(0.05 n) are high, the next ceil(0.25 n) mid, the rest low.
    """
    if not counts:
        raise ValueError("no languages to tier")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    n = len(ordered)
    n_high = math.ceil(0.05 * n)
    n_mid = math.ceil(0.25 * n)
    tiers = []
    for rank, (language, active) in enumerate(ordered):
        tier = "high" if rank < n_high else "mid" if rank < n_high + n_mid else "low"
        tiers.append(LanguageTier(language, active, tier))
    return tiers
