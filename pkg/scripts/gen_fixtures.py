#!/usr/bin/env python3
"""Generate the committed test fixtures.

Writes a small six-article corpus with known citation churn, the matching
label file, and a wikitext extraction fixture with a URL manifest. The
manifest lists, per revision, the raw URLs composed into that revision's
markup; it is written from the same URL constants the composer uses, never
from the extractor, so extraction tests compare against an independent
record.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from wikirel.corpus import ArticleHistory, Dataset, RevisionRecord, dump_corpus

FIXTURES = ROOT / "fixtures"

RETRIEVED_AT = datetime(2023, 8, 1, tzinfo=timezone.utc)

# Raw URLs as they appear in payloads; normalization is exercised downstream
# (www prefixes, uppercase hosts, fragments, default ports).
URLS = {
    "nature1": "https://www.nature.com/articles/s41586-020-1666-5",
    "nature2": "https://www.nature.com/articles/nclimate1234",
    "noaa1": "https://www.ncdc.noaa.gov/sotc/global/201913#gtemp",
    "noaa2": "http://noaa.gov:80/data/temperature",
    "bbc1": "https://www.bbc.co.uk/news/science-environment-56837908",
    "bbc2": "https://BBC.co.uk/news/av/12345",
    "ipcc1": "https://www.ipcc.ch/report/ar6/wg1/",
    "blogspot1": "http://climatesceptic.blogspot.com/2015/07/why-models-fail.html",
    "blogspot2": "http://denier.blogspot.com/2016/01/post.html",
    "dailymail1": "https://www.dailymail.co.uk/sciencetech/article-123/global-warming.html",
    "zerohedge1": "https://www.zerohedge.com/news/2017-05-01/climate-hoax",
    "examiner1": "http://www.examiner.com/article/climate-gate-revisited",
    "youtube1": "https://www.youtube.com/watch?v=dQw4w9WgXcQ",
    "twitter1": "https://twitter.com/nasa/status/790071701940977664",
    "arxiv1": "https://arxiv.org/abs/1602.01575",
    "ip1": "http://203.0.113.7/dataset/readings.csv",
}

ANON = {"203.0.113.45", "198.51.100.7"}

# Gaps between consecutive revisions cycle through this pattern (days).
STEP_DAYS = [21, 55, 34, 89, 144, 8, 233, 13, 5, 101]

_rev_counter = 9000000


def _timestamps(start: datetime, count: int, divisor: int = 1) -> list[datetime]:
    stamps = [start]
    for i in range(1, count):
        days = max(1, STEP_DAYS[(i - 1) % len(STEP_DAYS)] // divisor)
        stamps.append(stamps[-1] + timedelta(days=days, hours=(i * 5) % 17))
    return stamps


def _url_states(events: list[tuple[int, list[str], list[str]]], count: int) -> list[list[str]]:
    """Cumulative URL-key state per revision from (index, adds, removes) events."""
    by_index = {index: (adds, removes) for index, adds, removes in events}
    states: list[list[str]] = []
    current: list[str] = []
    for i in range(count):
        adds, removes = by_index.get(i, ([], []))
        for key in removes:
            current.remove(key)
        for key in adds:
            current.append(key)
        states.append(list(current))
    return states


def build_article(page_id, title, start, users, events, wikitext_builder=None):
    global _rev_counter
    count = len(users)
    stamps = _timestamps(start, count)
    states = _url_states(events, count)
    revisions = []
    parent = None
    for i in range(count):
        _rev_counter += 1 + (i * 3) % 5
        user = users[i]
        payload = {}
        if wikitext_builder is not None:
            payload["wikitext"] = wikitext_builder(i, states[i])
        else:
            payload["urls"] = tuple(URLS[k] for k in states[i])
        revisions.append(
            RevisionRecord(
                language="en",
                topic="climate",
                page_id=page_id,
                page_title=title,
                rev_id=_rev_counter,
                parent_id=parent,
                timestamp=stamps[i],
                user=user,
                registered=user not in ANON,
                **payload,
            )
        )
        parent = _rev_counter
    return ArticleHistory(
        page_id=page_id, page_title=title, revisions=tuple(revisions),
        retrieved_at=RETRIEVED_AT,
    )


def climate_wikitext(i: int, keys: list[str]) -> str:
    """Markup for the wikitext-payload article; every citation is a known URL."""
    blocks = [f"'''Climate sensitivity''' is reviewed here (draft {i})."]
    for key in keys:
        url = URLS[key]
        if key == "nature1":
            blocks.append(
                "<ref>{{cite journal |url=%s |doi=10.1038/s41586-020-1666-5 "
                "|title=State of the climate}}</ref>" % url
            )
        elif key == "arxiv1":
            blocks.append(f"A preprint is at {url}.")
        elif key == "bbc1":
            blocks.append(f"[{url} BBC coverage]")
        elif key == "ipcc1":
            blocks.append(f"* {url}")
        else:
            blocks.append(f"See {url} for details.")
    if i >= 5:
        blocks.append("{{doi|10.1175/JCLI-D-11-00387.1}}")
    blocks.append("[[Category:Climate]]")
    return "\n".join(blocks)


def mini_corpus() -> Dataset:
    articles = [
        build_article(
            101, "Global temperature record", datetime(2015, 2, 3, tzinfo=timezone.utc),
            ["Alice", "Alice", "Bob", "Carol", "Carol", "Carol", "203.0.113.45",
             "Dave", "Dave", "Erin", "Frank", "Frank", "Grace", "Alice", "Bob",
             "Bob", "198.51.100.7", "Carol", "Dave", "Erin", "Erin", "Frank",
             "Grace", "Grace", "Heidi", "Alice", "Bob", "Carol", "Dave", "Erin"],
            [
                (0, ["nature1"], []),
                (3, ["noaa1"], []),
                (5, ["bbc1"], []),
                (6, ["blogspot1"], []),
                (8, [], ["blogspot1"]),
                (10, ["dailymail1"], []),
                (13, [], ["dailymail1"]),
                (14, ["ipcc1"], []),
                (16, ["zerohedge1"], []),
                (17, [], ["zerohedge1"]),
                (19, ["nature2"], []),
                (22, ["youtube1"], []),
                (25, ["twitter1"], []),
                (27, ["arxiv1"], []),
            ],
        ),
        build_article(
            102, "Climate change denial", datetime(2015, 7, 19, tzinfo=timezone.utc),
            ["Bob", "Carol", "Carol", "Dave", "Alice", "Alice", "Alice",
             "203.0.113.45", "Erin", "Frank", "Bob", "Bob", "Grace", "Carol",
             "Dave", "Dave", "Heidi", "Erin", "198.51.100.7", "Frank", "Alice",
             "Bob", "Carol", "Dave", "Erin"],
            [
                (0, ["bbc2"], []),
                (1, ["examiner1"], []),
                (4, ["blogspot2"], []),
                (7, ["zerohedge1"], []),
                (9, [], ["zerohedge1"]),
                (10, [], ["examiner1"]),
                (13, ["examiner1"], []),   # removed earlier, cited again
                (16, [], ["blogspot2"]),
                (18, ["dailymail1"], []),
                (20, [], ["dailymail1", "examiner1"]),
                (22, ["noaa2"], []),
                (24, ["ipcc1"], []),
            ],
        ),
        build_article(
            103, "Sea level rise", datetime(2016, 3, 11, tzinfo=timezone.utc),
            ["Carol", "Dave", "Dave", "Erin", "Alice", "Frank", "Frank", "Frank",
             "Grace", "Bob", "203.0.113.45", "Heidi", "Carol", "Carol", "Dave",
             "Erin", "Alice", "Bob", "Frank", "Grace", "Heidi"],
            [
                (0, ["noaa1"], []),
                (3, ["nature2"], []),
                (5, ["ipcc1"], []),
                (9, ["bbc1"], []),
                (10, ["blogspot1"], []),
                (11, [], ["blogspot1"]),
                (14, ["arxiv1"], []),
                (16, ["dailymail1"], []),
                (18, [], ["dailymail1"]),
                (20, ["ip1"], []),
            ],
        ),
        build_article(
            104, "Carbon dioxide", datetime(2017, 1, 25, tzinfo=timezone.utc),
            ["Dave", "Erin", "Erin", "Frank", "Grace", "Alice", "Bob", "Bob",
             "Carol", "198.51.100.7", "Dave", "Erin", "Frank", "Frank", "Grace",
             "Heidi", "Alice", "Bob", "Carol", "Dave"],
            [
                (0, ["nature1"], []),
                (2, ["noaa2"], []),
                (4, ["youtube1"], []),
                (6, ["zerohedge1"], []),
                (8, [], ["zerohedge1"]),
                (9, ["examiner1"], []),
                (10, [], ["examiner1"]),
                (12, ["bbc1"], []),
                (15, ["twitter1"], []),
                (17, ["ipcc1"], []),
            ],
        ),
        build_article(
            105, "Extreme weather", datetime(2018, 9, 5, tzinfo=timezone.utc),
            ["Erin", "Frank", "Grace", "Grace", "Heidi", "Alice", "203.0.113.45",
             "Bob", "Carol", "Dave", "Dave", "Erin", "Frank", "Grace", "Heidi"],
            [
                (0, ["bbc1"], []),
                (2, ["dailymail1"], []),
                (5, [], ["dailymail1"]),
                (6, ["blogspot1"], []),
                (7, [], ["blogspot1"]),
                (8, ["noaa1"], []),
                (10, ["nature2"], []),
                (12, ["zerohedge1"], []),
                (14, ["ipcc1"], []),
            ],
        ),
        build_article(
            106, "Climate sensitivity", datetime(2019, 4, 14, tzinfo=timezone.utc),
            ["Alice", "Alice", "Alice", "Bob", "Bob", "Carol", "Alice", "Alice",
             "Carol"],
            [
                (0, ["nature1"], []),
                (2, ["blogspot1"], []),
                (3, ["bbc1"], []),
                (4, [], ["blogspot1"]),
                (5, ["ipcc1"], []),
                (6, ["arxiv1"], []),
                (8, ["youtube1"], []),
            ],
            wikitext_builder=climate_wikitext,
        ),
    ]
    return Dataset(topic="climate", language="en", articles=tuple(articles))


LABEL_ROWS = [
    ("nature.com", "generally reliable"),
    ("noaa.gov", "generally reliable"),
    ("bbc.co.uk", "generally reliable"),
    ("ipcc.ch", "generally reliable"),
    ("youtube.com", "no consensus"),
    ("blogspot.com", "generally unreliable"),
    ("dailymail.co.uk", "deprecated"),
    ("zerohedge.com", "deprecated"),
    ("examiner.com", "blacklisted"),
]


def write_labels(path: Path) -> None:
    lines = ["# snapshot-date: 2023-08-01"]
    lines += [f"{domain},{category}" for domain, category in LABEL_ROWS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Wikitext extraction fixture: 30 revisions, each a different composition of
# known URLs, with the expected raw-URL set recorded per revision.

POOL = {
    "journal": "https://www.nature.com/articles/s41586-020-1666-5",
    "fragment": "https://www.ncdc.noaa.gov/sotc/global/201913#gtemp",
    "upper": "https://BBC.co.uk/News/Av/12345",
    "port": "http://noaa.gov:80/data/temperature",
    "encoded": "https://en.wikipedia.org/wiki/Climate%20change%2Fnotes%41",
    "query": "https://www.youtube.com/watch?v=dQw4w9WgXcQ",
    "plain": "https://arxiv.org/abs/1602.01575",
    "deep": "http://climatesceptic.blogspot.com/2015/07/why-models-fail.html",
    "tricky": "https://example.org/page(1)/view",
    "ip": "http://203.0.113.7/dataset/readings.csv",
    "short": "http://ipcc.ch/ar6",
    "tilde": "https://web.mit.edu/~user/notes",
}

DOIS = {
    "param": "10.1038/s41586-020-1666-5",
    "template": "10.1175/JCLI-D-11-00387.1",
}


def _compose(i: int) -> tuple[str, set[str]]:
    """Revision i of the extraction article: (wikitext, expected raw URLs)."""
    keys = sorted(POOL)
    chosen = [keys[(i + j * 7) % len(keys)] for j in range(2 + i % 4)]
    blocks = [f"== Revision {i} =="]
    expected: set[str] = set()
    for j, key in enumerate(sorted(set(chosen))):
        url = POOL[key]
        style = (i + j) % 6
        if style == 0:
            blocks.append(f"Background reading at {url} covers this.")
        elif style == 1:
            blocks.append(f"See {url}.")
        elif style == 2:
            blocks.append(f"[{url} report]")
        elif style == 3:
            blocks.append("<ref>{{cite web |url=%s |title=Item %d}}</ref>" % (url, j))
        elif style == 4:
            blocks.append(f"({url})")
        else:
            blocks.append(f"* {url}")
        expected.add(url)
    if i % 5 == 0:
        blocks.append(
            "{{cite journal |title=Attribution |doi=%s |year=2020}}" % DOIS["param"]
        )
        expected.add("https://doi.org/" + DOIS["param"])
    if i % 7 == 0:
        blocks.append("Compare {{doi|%s}} too." % DOIS["template"])
        expected.add("https://doi.org/" + DOIS["template"])
    if i % 4 == 0:
        # Identifiers without a canonical URL and non-web schemes yield nothing.
        blocks.append("{{cite book |isbn=978-3-16-148410-0 |issn=0028-0836}}")
        blocks.append("Mirrored at ftp://archive.example.org/pub/data.")
    return "\n".join(blocks), expected


def extraction_fixture() -> tuple[ArticleHistory, dict[str, list[str]]]:
    global _rev_counter
    count = 30
    stamps = _timestamps(datetime(2020, 5, 1, tzinfo=timezone.utc), count, divisor=3)
    users = ["Mallory", "Niaj", "Olivia", "Peggy"]
    revisions = []
    manifest: dict[str, list[str]] = {}
    parent = None
    for i in range(count):
        _rev_counter += 2 + i % 3
        text, expected = _compose(i)
        revisions.append(
            RevisionRecord(
                language="en",
                topic="extraction",
                page_id=7001,
                page_title="Composed citations",
                rev_id=_rev_counter,
                parent_id=parent,
                timestamp=stamps[i],
                user=users[i % len(users)],
                registered=True,
                wikitext=text,
            )
        )
        manifest[str(_rev_counter)] = sorted(expected)
        parent = _rev_counter
    article = ArticleHistory(
        page_id=7001, page_title="Composed citations", revisions=tuple(revisions),
        retrieved_at=datetime(2023, 8, 1, tzinfo=timezone.utc),
    )
    return article, manifest


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    dataset = mini_corpus()
    n_revs = sum(len(a.revisions) for a in dataset.articles)
    assert n_revs == 120, n_revs
    dump_corpus([dataset], FIXTURES / "mini_climate_en.jsonl")
    write_labels(FIXTURES / "mini_perennial.csv")

    article, manifest = extraction_fixture()
    wiki_dataset = Dataset(topic="extraction", language="en", articles=(article,))
    dump_corpus([wiki_dataset], FIXTURES / "wikitext_article.jsonl")
    (FIXTURES / "wikitext_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
