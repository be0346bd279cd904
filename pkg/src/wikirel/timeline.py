"""Per (domain, article) presence timelines.

Permanence accumulates over possibly non-contiguous presence intervals; age
runs from the first addition to the collection instant. Day quantities use
retrieved-at as the open-interval endpoint, revision quantities run through
the last merged revision inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence

from .corpus import days_between
from .extract import ADD, ArticleEdits, MergedRevision, SourceEdit


@dataclass(frozen=True)
class DomainTimeline:
    """Presence history of one domain on one article."""

    page_id: int
    domain: str
    # (add, remove) pairs; remove is None for the trailing open interval.
    intervals: tuple[tuple[SourceEdit, SourceEdit | None], ...]
    perm_days: float
    perm_revs: int
    age_days: float
    age_revs: int
    currently_present: bool
    adds: tuple[SourceEdit, ...]
    removes: tuple[SourceEdit, ...]

    @property
    def first_add(self) -> SourceEdit:
        return self.adds[0]

    def self_perm_days(self) -> float:
        """Permanence share of age, day variant; 0 when the age is zero."""
        return self.perm_days / self.age_days if self.age_days > 0 else 0.0

    def self_perm_revs(self) -> float:
        return self.perm_revs / self.age_revs if self.age_revs > 0 else 0.0


def build_timeline(
    merged: Sequence[MergedRevision],
    edits: Sequence[SourceEdit],
    retrieved_at: datetime,
) -> dict[str, DomainTimeline]:
    """DomainTimeline per domain with at least one event on the article."""
    n_merged = len(merged)
    for edit in edits:
        if not 0 <= edit.index < n_merged:
            raise ValueError(
                f"edit references unknown revision index {edit.index} "
                f"(article has {n_merged} merged revisions)"
            )

    by_domain: dict[str, list[SourceEdit]] = {}
    for edit in edits:
        by_domain.setdefault(edit.domain, []).append(edit)

    timelines: dict[str, DomainTimeline] = {}
    for domain, events in by_domain.items():
        adds = tuple(e for e in events if e.action == ADD)
        removes = tuple(e for e in events if e.action != ADD)
        intervals: list[tuple[SourceEdit, SourceEdit | None]] = []
        pending: SourceEdit | None = None
        for event in events:
            if event.action == ADD:
                if pending is not None:
                    raise ValueError(f"{domain}: two adds without a remove between")
                pending = event
            else:
                if pending is None:
                    raise ValueError(f"{domain}: remove without a preceding add")
                intervals.append((pending, event))
                pending = None
        currently_present = pending is not None
        if pending is not None:
            intervals.append((pending, None))

        perm_days = 0.0
        perm_revs = 0
        for add, remove in intervals:
            end_time = retrieved_at if remove is None else remove.timestamp
            perm_days += days_between(add.timestamp, end_time)
            end_index = n_merged if remove is None else remove.index
            perm_revs += end_index - add.index

        first = adds[0]
        timelines[domain] = DomainTimeline(
            page_id=first.page_id,
            domain=domain,
            intervals=tuple(intervals),
            perm_days=perm_days,
            perm_revs=perm_revs,
            age_days=days_between(first.timestamp, retrieved_at),
            age_revs=n_merged - first.index,
            currently_present=currently_present,
            adds=adds,
            removes=removes,
        )
    return timelines


def build_dataset_timelines(
    analyzed: Mapping[int, ArticleEdits],
) -> dict[int, dict[str, DomainTimeline]]:
    """Timeline maps per article, keyed by page id."""
    return {
        page_id: build_timeline(art.merged, art.edits, art.retrieved_at)
        for page_id, art in analyzed.items()
    }
