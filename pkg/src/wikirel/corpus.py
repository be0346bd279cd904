"""Revision data model and fixture corpus I/O.

A corpus file is UTF-8 JSON Lines: one object per revision plus one
``{"meta": ...}`` object per article carrying the retrieved-at instant.
Revisions are grouped into one :class:`Dataset` per (topic, language) pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

SECONDS_PER_DAY = 86400.0


class FixtureError(ValueError):
    """Raised for malformed or inconsistent corpus files."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.path = path
        self.line = line


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 ``YYYY-MM-DDThh:mm:ssZ`` string to an aware UTC instant."""
    try:
        return datetime.strptime(value, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad timestamp {value!r}: expected YYYY-MM-DDThh:mm:ssZ") from exc


def format_timestamp(instant: datetime) -> str:
    return instant.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def days_between(start: datetime, end: datetime) -> float:
    """Fractional days from start to end; days are defined as 86400 s throughout."""
    return (end - start).total_seconds() / SECONDS_PER_DAY


@dataclass(frozen=True, slots=True)
class RevisionRecord:
    """One revision of one article.

    Exactly one of ``urls``/``wikitext`` is set: either the citation URLs were
    pre-extracted upstream, or the raw wikitext is kept for the extractor.
    """

    language: str
    topic: str
    page_id: int
    page_title: str
    rev_id: int
    parent_id: int | None
    timestamp: datetime
    user: str
    registered: bool
    urls: tuple[str, ...] | None = None
    wikitext: str | None = None
    # Byte offset of the edit within the document, when the source recorded it.
    # Carried through verbatim; no feature consumes it.
    position: int | None = None

    def __post_init__(self) -> None:
        if (self.urls is None) == (self.wikitext is None):
            raise ValueError(
                f"revision {self.rev_id}: exactly one of urls/wikitext must be present"
            )

    @classmethod
    def from_dict(cls, obj: dict) -> "RevisionRecord":
        urls = obj.get("urls")
        return cls(
            language=obj["language"],
            topic=obj["topic"],
            page_id=int(obj["page_id"]),
            page_title=obj["page_title"],
            rev_id=int(obj["rev_id"]),
            parent_id=None if obj.get("parent_id") is None else int(obj["parent_id"]),
            timestamp=parse_timestamp(obj["timestamp"]),
            user=obj["user"],
            registered=bool(obj["registered"]),
            urls=None if urls is None else tuple(str(u) for u in urls),
            wikitext=obj.get("wikitext"),
            position=None if obj.get("position") is None else int(obj["position"]),
        )

    def to_dict(self) -> dict:
        obj: dict = {
            "language": self.language,
            "topic": self.topic,
            "page_id": self.page_id,
            "page_title": self.page_title,
            "rev_id": self.rev_id,
            "parent_id": self.parent_id,
            "timestamp": format_timestamp(self.timestamp),
            "user": self.user,
            "registered": self.registered,
        }
        if self.urls is not None:
            obj["urls"] = list(self.urls)
        else:
            obj["wikitext"] = self.wikitext
        if self.position is not None:
            obj["position"] = self.position
        return obj


@dataclass(frozen=True, slots=True)
class ArticleHistory:
    """All revisions of one article, sorted by timestamp then revision id."""

    page_id: int
    page_title: str
    revisions: tuple[RevisionRecord, ...]
    retrieved_at: datetime

    def __post_init__(self) -> None:
        if not self.revisions:
            raise ValueError(f"article {self.page_id}: no revisions")
        last = max(r.timestamp for r in self.revisions)
        if self.retrieved_at < last:
            raise ValueError(
                f"article {self.page_id}: retrieved_at precedes last revision"
            )

    @property
    def age_days(self) -> float:
        return days_between(self.revisions[0].timestamp, self.retrieved_at)

    def merged_revision_count(self) -> int:
        """Number of maximal same-user revision runs (the extractor's merge unit)."""
        count = 0
        previous: str | None = None
        for rev in self.revisions:
            if rev.user != previous:
                count += 1
            previous = rev.user
        return count


@dataclass(frozen=True, slots=True)
class Dataset:
    """All articles of one (topic, language) cell."""

    topic: str
    language: str
    articles: tuple[ArticleHistory, ...]
    tier: str = "unassigned"

    def __post_init__(self) -> None:
        ids = [a.page_id for a in self.articles]
        if len(ids) != len(set(ids)):
            raise ValueError(f"dataset {self.key}: duplicate page ids")

    @property
    def key(self) -> tuple[str, str]:
        return (self.topic, self.language)


class AgeTotals(NamedTuple):
    article_days: float
    article_revisions: int
    unique_users: int


def dataset_age_totals(dataset: Dataset) -> AgeTotals:
    """Total article age in days, total merged revisions, and distinct user names.

    Article age runs from the first revision to retrieved-at; the revision total
    counts merged (same-user run) revisions, matching the extractor's merge rule.
    """
    days = 0.0
    revisions = 0
    users: set[str] = set()
    for article in dataset.articles:
        days += article.age_days
        revisions += article.merged_revision_count()
        users.update(rev.user for rev in article.revisions)
    return AgeTotals(days, revisions, len(users))


def _iter_json_lines(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FixtureError(f"invalid JSON ({exc.msg})", str(path), number) from exc
            if not isinstance(obj, dict):
                raise FixtureError("line is not a JSON object", str(path), number)
            yield number, obj


def load_corpus(path: str | Path, format: str = "jsonl") -> list[Dataset]:
    """Read a corpus file into datasets grouped by (topic, language).

    Per-article retrieved-at comes from the article's meta line when present,
    otherwise from its maximum revision timestamp. Revisions are sorted by
    timestamp then revision id. Duplicate revision ids and parent-chain
    timestamp regressions are load errors.
    """
    if format != "jsonl":
        raise ValueError(f"unknown fixture format {format!r}")
    path = Path(path)
    if not path.exists():
        raise FixtureError("no such file", str(path))

    revisions: dict[tuple[str, str, int], list[RevisionRecord]] = {}
    rev_lines: dict[tuple[str, str, int], dict[int, int]] = {}
    meta: dict[int, tuple[datetime, int]] = {}
    for number, obj in _iter_json_lines(path):
        if "meta" in obj:
            body = obj["meta"]
            if not isinstance(body, dict) or "page_id" not in body or "retrieved_at" not in body:
                raise FixtureError("meta line needs page_id and retrieved_at", str(path), number)
            try:
                instant = parse_timestamp(body["retrieved_at"])
            except ValueError as exc:
                raise FixtureError(str(exc), str(path), number) from exc
            meta[int(body["page_id"])] = (instant, number)
            continue
        try:
            record = RevisionRecord.from_dict(obj)
        except (KeyError, TypeError, ValueError) as exc:
            detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            raise FixtureError(f"malformed revision: {detail}", str(path), number) from exc
        group = (record.topic, record.language, record.page_id)
        seen = rev_lines.setdefault(group, {})
        if record.rev_id in seen:
            raise FixtureError(
                f"duplicate revision id {record.rev_id} (first at line {seen[record.rev_id]})",
                str(path),
                number,
            )
        seen[record.rev_id] = number
        revisions.setdefault(group, []).append(record)

    pages_by_id: dict[int, list[tuple[str, str]]] = {}
    for topic, language, page_id in revisions:
        pages_by_id.setdefault(page_id, []).append((topic, language))
    for page_id, cells in pages_by_id.items():
        if page_id in meta and len(cells) > 1:
            raise FixtureError(
                f"meta line for page {page_id} is ambiguous across datasets", str(path)
            )

    grouped: dict[tuple[str, str], list[ArticleHistory]] = {}
    for (topic, language, page_id), records in sorted(revisions.items()):
        records.sort(key=lambda r: (r.timestamp, r.rev_id))
        by_id = {r.rev_id: r for r in records}
        for record in records:
            parent = by_id.get(record.parent_id) if record.parent_id is not None else None
            if parent is not None and parent.timestamp > record.timestamp:
                raise FixtureError(
                    f"revision {record.rev_id} predates its parent {record.parent_id}",
                    str(path),
                    rev_lines[(topic, language, page_id)][record.rev_id],
                )
        if page_id in meta:
            retrieved_at, meta_line = meta[page_id]
        else:
            retrieved_at, meta_line = records[-1].timestamp, None
        try:
            article = ArticleHistory(
                page_id=page_id,
                page_title=records[0].page_title,
                revisions=tuple(records),
                retrieved_at=retrieved_at,
            )
        except ValueError as exc:
            raise FixtureError(str(exc), str(path), meta_line) from exc
        grouped.setdefault((topic, language), []).append(article)

    return [
        Dataset(topic=topic, language=language, articles=tuple(articles))
        for (topic, language), articles in sorted(grouped.items())
    ]


def dump_corpus(datasets: Iterable[Dataset], path: str | Path) -> None:
    """Serialize datasets back to the JSONL fixture format (load/dump round-trips)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for dataset in sorted(datasets, key=lambda d: d.key):
            for article in sorted(dataset.articles, key=lambda a: a.page_id):
                meta = {
                    "meta": {
                        "page_id": article.page_id,
                        "retrieved_at": format_timestamp(article.retrieved_at),
                    }
                }
                handle.write(json.dumps(meta, ensure_ascii=False) + "\n")
                for rev in article.revisions:
                    handle.write(json.dumps(rev.to_dict(), ensure_ascii=False) + "\n")


def with_tier(dataset: Dataset, tier: str) -> Dataset:
    if tier not in ("high", "mid", "low", "unassigned"):
        raise ValueError(f"unknown tier {tier!r}")
    return replace(dataset, tier=tier)
