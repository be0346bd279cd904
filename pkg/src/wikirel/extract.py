"""Citation extraction: payloads to canonical URLs, merged revisions, source edits.

The pipeline per article is: collect raw URLs from each revision payload,
canonicalize them, collapse consecutive same-user revisions, then diff
adjacent merged states at domain level. An add/remove event is emitted only
when a domain's URL count crosses zero.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from urllib.parse import urlsplit

from .corpus import ArticleHistory, Dataset, format_timestamp
from .psl import SuffixRules, bundled

ADD = "add"
REMOVE = "remove"

# Bare external links: stop at whitespace and wikitext structure characters.
_URL_RE = re.compile(r"https?://[^\s<>\"\[\]{}|]+", re.IGNORECASE)
# DOI as a template parameter ("|doi=...") or a {{doi|...}} template.
_DOI_PARAM_RE = re.compile(r"\|\s*doi\s*=\s*([^|{}\s]+)", re.IGNORECASE)
_DOI_TEMPLATE_RE = re.compile(r"\{\{\s*doi\s*\|\s*([^|{}\s]+)", re.IGNORECASE)

_TRAILING_PUNCTUATION = ".,;:!?)\"'"
_UNRESERVED = frozenset(string.ascii_letters + string.digits + "-._~")
_PERCENT_RE = re.compile(r"%([0-9A-Fa-f]{2})")


def extract_urls(wikitext: str) -> set[str]:
    """Raw URL strings cited in a wikitext blob.

    Covers citation templates, reference tags, and bare external links (all of
    which surface as http(s) URLs in the markup) plus DOI identifiers, which
    are emitted as ``https://doi.org/<doi>``. ISBN/ISSN identifiers have no
    canonical URL and yield nothing. Unparseable markup contributes nothing.
    """
    found: set[str] = set()
    for match in _URL_RE.finditer(wikitext):
        url = match.group(0).rstrip(_TRAILING_PUNCTUATION)
        if url:
            found.add(url)
    for pattern in (_DOI_PARAM_RE, _DOI_TEMPLATE_RE):
        for match in pattern.finditer(wikitext):
            doi = match.group(1).strip().rstrip(_TRAILING_PUNCTUATION)
            if doi.startswith("10."):
                found.add(f"https://doi.org/{doi}")
    return found


def _decode_unreserved(component: str) -> str:
    def replace(match: re.Match[str]) -> str:
        char = chr(int(match.group(1), 16))
        return char if char in _UNRESERVED else match.group(0)

    return _PERCENT_RE.sub(replace, component)


def apply_redirects(raw: str, redirect_map: Mapping[str, str]) -> str:
    """Rewrite by the longest map key that is an exact prefix of the raw URL."""
    best = ""
    for source in redirect_map:
        if raw.startswith(source) and len(source) > len(best):
            best = source
    if best:
        return redirect_map[best] + raw[len(best):]
    return raw


def normalize_url(raw: str, redirect_map: Mapping[str, str] | None = None) -> str | None:
    """Canonical form of a raw URL, or None when it is rejected.

    Redirect mapping happens first, on the raw string. Normalization then
    lowercases scheme and host, strips the fragment and default ports,
    percent-decodes unreserved characters in path and query, and removes a
    single leading ``www.``. Non-http(s) schemes and hostless strings are
    rejected.
    """
    if redirect_map:
        raw = apply_redirects(raw, redirect_map)
    try:
        parts = urlsplit(raw)
        host = parts.hostname
        port = parts.port
    except ValueError:
        return None
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https") or not host:
        return None
    if any(c.isspace() for c in host):
        return None
    if host.startswith("www.") and len(host) > 4:
        host = host[4:]
    default_port = 80 if scheme == "http" else 443
    netloc = host if port is None or port == default_port else f"{host}:{port}"
    path = _decode_unreserved(parts.path)
    query = _decode_unreserved(parts.query)
    url = f"{scheme}://{netloc}{path}"
    if query:
        url += f"?{query}"
    return url


def load_redirect_map(path: str | Path) -> dict[str, str]:
    """Read a redirect map file: one ``from<TAB>to`` pair per line."""
    mapping: dict[str, str] = {}
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise ValueError(f"{path}:{number}: expected from<TAB>to")
        mapping[fields[0]] = fields[1]
    return mapping


class UrlCanonicalizer:
    """Shared canonicalization state: redirect map plus reject accounting."""

    def __init__(self, redirect_map: Mapping[str, str] | None = None):
        self.redirect_map = dict(redirect_map) if redirect_map else {}
        self.rejected = 0
        self.accepted = 0

    def canonicalize(self, raw: str) -> str | None:
        url = normalize_url(raw, self.redirect_map)
        if url is None:
            self.rejected += 1
        else:
            self.accepted += 1
        return url


def extract_domain(url: str, rules: SuffixRules | None = None) -> str:
    """Registrable domain of a canonical URL.

    Hosts matching no suffix rule (IP literals, unknown TLDs) come back whole.
    """
    if rules is None:
        rules = bundled()
    host = urlsplit(url).hostname
    if not host:
        raise ValueError(f"URL has no host: {url!r}")
    return rules.registrable_domain(host)


@dataclass(frozen=True)
class MergedRevision:
    """A maximal run of consecutive same-user revisions, collapsed to its final state."""

    index: int
    user: str
    registered: bool
    timestamp: datetime
    urls: frozenset[str]
    domain_counts: Mapping[str, int]

    def present_domains(self) -> frozenset[str]:
        return frozenset(d for d, c in self.domain_counts.items() if c > 0)


def _revision_state(
    urls: Iterable[str] | None,
    wikitext: str | None,
    canonicalizer: UrlCanonicalizer,
    rules: SuffixRules,
) -> tuple[frozenset[str], dict[str, int]]:
    raw = set(urls) if urls is not None else extract_urls(wikitext or "")
    canonical = {url for url in (canonicalizer.canonicalize(r) for r in raw) if url}
    counts = Counter(extract_domain(url, rules) for url in canonical)
    return frozenset(canonical), dict(counts)


def merge_consecutive(
    article: ArticleHistory,
    canonicalizer: UrlCanonicalizer | None = None,
    rules: SuffixRules | None = None,
) -> list[MergedRevision]:
    """Collapse same-user revision runs, regardless of elapsed time between them."""
    if canonicalizer is None:
        canonicalizer = UrlCanonicalizer()
    if rules is None:
        rules = bundled()
    merged: list[MergedRevision] = []
    run_last = None
    for rev in article.revisions:
        if run_last is not None and rev.user == run_last.user:
            run_last = rev
            continue
        if run_last is not None:
            merged.append(_finish_run(len(merged), run_last, canonicalizer, rules))
        run_last = rev
    if run_last is not None:
        merged.append(_finish_run(len(merged), run_last, canonicalizer, rules))
    return merged


def _finish_run(index, last_rev, canonicalizer, rules) -> MergedRevision:
    urls, counts = _revision_state(last_rev.urls, last_rev.wikitext, canonicalizer, rules)
    return MergedRevision(
        index=index,
        user=last_rev.user,
        registered=last_rev.registered,
        timestamp=last_rev.timestamp,
        urls=urls,
        domain_counts=counts,
    )


@dataclass(frozen=True)
class SourceEdit:
    """One domain-level add or remove event on one article."""

    page_id: int
    domain: str
    action: str
    index: int
    timestamp: datetime
    user: str
    registered: bool
    first_add: bool = False
    last_remove: bool = False

    def to_dict(self) -> dict:
        return {
            "page_id": self.page_id,
            "domain": self.domain,
            "action": self.action,
            "index": self.index,
            "timestamp": format_timestamp(self.timestamp),
            "user": self.user,
            "registered": self.registered,
            "first_add": self.first_add,
            "last_remove": self.last_remove,
        }


def diff_to_source_edits(merged: Sequence[MergedRevision], page_id: int) -> list[SourceEdit]:
    """Domain add/remove events between adjacent merged revisions.

    Revision 0 diffs against the empty state, so first-revision domains are
    add events by the article creator. URL-count changes that stay positive
    produce no event.
    """
    edits: list[SourceEdit] = []
    previous: frozenset[str] = frozenset()
    for rev in merged:
        current = rev.present_domains()
        for domain in sorted(current - previous):
            edits.append(_edit(page_id, domain, ADD, rev))
        for domain in sorted(previous - current):
            edits.append(_edit(page_id, domain, REMOVE, rev))
        previous = current

    first_seen: set[str] = set()
    last_index: dict[str, int] = {}  # domain -> position of its final event
    for position, edit in enumerate(edits):
        last_index[edit.domain] = position
    flagged: list[SourceEdit] = []
    for position, edit in enumerate(edits):
        first_add = edit.action == ADD and edit.domain not in first_seen
        if edit.action == ADD:
            first_seen.add(edit.domain)
        last_remove = edit.action == REMOVE and last_index[edit.domain] == position
        flagged.append(
            SourceEdit(
                page_id=edit.page_id,
                domain=edit.domain,
                action=edit.action,
                index=edit.index,
                timestamp=edit.timestamp,
                user=edit.user,
                registered=edit.registered,
                first_add=first_add,
                last_remove=last_remove,
            )
        )
    return flagged


def _edit(page_id: int, domain: str, action: str, rev: MergedRevision) -> SourceEdit:
    return SourceEdit(
        page_id=page_id,
        domain=domain,
        action=action,
        index=rev.index,
        timestamp=rev.timestamp,
        user=rev.user,
        registered=rev.registered,
    )


@dataclass(frozen=True)
class ArticleEdits:
    """Extraction result for one article: merged revisions plus source edits."""

    page_id: int
    retrieved_at: datetime
    merged: tuple[MergedRevision, ...]
    edits: tuple[SourceEdit, ...]


def analyze_article(
    article: ArticleHistory,
    canonicalizer: UrlCanonicalizer | None = None,
    rules: SuffixRules | None = None,
) -> ArticleEdits:
    merged = merge_consecutive(article, canonicalizer, rules)
    edits = diff_to_source_edits(merged, article.page_id)
    return ArticleEdits(
        page_id=article.page_id,
        retrieved_at=article.retrieved_at,
        merged=tuple(merged),
        edits=tuple(edits),
    )


def analyze_dataset(
    dataset: Dataset,
    canonicalizer: UrlCanonicalizer | None = None,
    rules: SuffixRules | None = None,
) -> dict[int, ArticleEdits]:
    """ArticleEdits per page id, in dataset article order."""
    if canonicalizer is None:
        canonicalizer = UrlCanonicalizer()
    if rules is None:
        rules = bundled()
    return {
        article.page_id: analyze_article(article, canonicalizer, rules)
        for article in dataset.articles
    }
