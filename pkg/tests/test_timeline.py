import random

import pytest

from wikirel.corpus import ArticleHistory, RevisionRecord, parse_timestamp
from wikirel.extract import analyze_article, diff_to_source_edits, merge_consecutive
from wikirel.psl import SuffixRules
from wikirel.timeline import build_timeline

from oracles import replay_article, synthetic_dataset

RULES = SuffixRules.from_lines(["com", "org", "net", "io"])


def rev(rev_id, user, ts, urls):
    return RevisionRecord(
        language="en", topic="t", page_id=3, page_title="A", rev_id=rev_id,
        parent_id=rev_id - 1 if rev_id > 1 else None,
        timestamp=parse_timestamp(ts), user=user, registered=True,
        urls=tuple(urls),
    )


def timelines_for(revisions, retrieved):
    article = ArticleHistory(
        page_id=3, page_title="A", revisions=tuple(revisions),
        retrieved_at=parse_timestamp(retrieved),
    )
    merged = merge_consecutive(article, rules=RULES)
    edits = diff_to_source_edits(merged, page_id=3)
    return build_timeline(merged, edits, article.retrieved_at)


def interval_indices(timeline):
    return tuple(
        (add.index, None if remove is None else remove.index)
        for add, remove in timeline.intervals
    )


def test_worked_example_closed_interval():
    # merged states on days 0/10/30, retrieval day 40; domain present only in
    # the middle state: permanence 20 days / 1 revision, age 30 days / 2 revs
    t = timelines_for(
        [
            rev(1, "A", "2020-01-01T00:00:00Z", []),
            rev(2, "B", "2020-01-11T00:00:00Z", ["https://a.com/x"]),
            rev(3, "C", "2020-01-31T00:00:00Z", []),
        ],
        "2020-02-10T00:00:00Z",
    )["a.com"]
    assert interval_indices(t) == ((1, 2),)
    assert t.perm_days == 20.0
    assert t.perm_revs == 1
    assert t.age_days == 30.0
    assert t.age_revs == 2
    assert not t.currently_present


def test_open_interval_runs_to_retrieval():
    t = timelines_for(
        [
            rev(1, "A", "2020-01-01T00:00:00Z", ["https://a.com/x"]),
            rev(2, "B", "2020-01-05T00:00:00Z", ["https://a.com/x"]),
        ],
        "2020-01-21T00:00:00Z",
    )["a.com"]
    assert interval_indices(t) == ((0, None),)
    assert t.perm_days == 20.0
    assert t.perm_revs == 2  # len(merged) - add index
    assert t.age_days == 20.0
    assert t.age_revs == 2
    assert t.currently_present


def test_multi_interval_readdition():
    t = timelines_for(
        [
            rev(1, "A", "2020-01-01T00:00:00Z", ["https://a.com/x"]),
            rev(2, "B", "2020-01-03T00:00:00Z", []),
            rev(3, "C", "2020-01-06T00:00:00Z", ["https://a.com/y"]),
            rev(4, "D", "2020-01-10T00:00:00Z", []),
        ],
        "2020-01-16T00:00:00Z",
    )["a.com"]
    assert interval_indices(t) == ((0, 1), (2, 3))
    assert t.perm_days == 2.0 + 4.0
    assert t.perm_revs == 1 + 1
    assert t.age_days == 15.0
    assert t.age_revs == 4
    assert len(t.adds) == 2 and len(t.removes) == 2


def test_self_permanence_ratios():
    t = timelines_for(
        [
            rev(1, "A", "2020-01-01T00:00:00Z", []),
            rev(2, "B", "2020-01-05T00:00:00Z", ["https://a.com/x"]),
            rev(3, "C", "2020-01-09T00:00:00Z", []),
        ],
        "2020-01-13T00:00:00Z",
    )["a.com"]
    assert t.self_perm_days() == pytest.approx(4.0 / 8.0)
    assert t.self_perm_revs() == pytest.approx(1.0 / 2.0)


def test_zero_age_self_permanence_is_zero():
    # added in the very last merged state at the retrieval instant
    t = timelines_for(
        [rev(1, "A", "2020-01-01T00:00:00Z", ["https://a.com/x"])],
        "2020-01-01T00:00:00Z",
    )["a.com"]
    assert t.age_days == 0.0
    assert t.self_perm_days() == 0.0
    assert t.self_perm_revs() == t.perm_revs / t.age_revs


def test_replay_equivalence_on_random_histories():
    """DomainTimeline must match presence-array replay, including re-additions."""
    checked = 0
    for seed in range(200):
        rnd = random.Random(seed)
        dataset = synthetic_dataset(rnd, max_articles=3)
        for article in dataset.articles:
            expected = replay_article(article)
            result = analyze_article(article)
            timelines = build_timeline(result.merged, result.edits, article.retrieved_at)
            assert sorted(timelines) == sorted(expected)
            for domain, want in expected.items():
                got = timelines[domain]
                assert interval_indices(got) == tuple(want.intervals), (seed, domain)
                assert got.perm_days == pytest.approx(want.perm_days, abs=1e-9)
                assert got.perm_revs == want.perm_revs
                assert got.age_days == pytest.approx(want.age_days, abs=1e-9)
                assert got.age_revs == want.age_revs
                assert got.currently_present == want.currently_present
                assert [e.index for e in got.adds] == [e.index for e in want.adds]
                assert [e.index for e in got.removes] == [e.index for e in want.removes]
                assert [e.first_add for e in got.adds] == [e.first for e in want.adds]
                assert [e.last_remove for e in got.removes] == [e.last for e in want.removes]
                checked += 1
    assert checked > 500


def test_build_timeline_rejects_inconsistent_events():
    article = ArticleHistory(
        page_id=3, page_title="A",
        revisions=(rev(1, "A", "2020-01-01T00:00:00Z", ["https://a.com/x"]),),
        retrieved_at=parse_timestamp("2020-02-01T00:00:00Z"),
    )
    merged = merge_consecutive(article, rules=RULES)
    edits = diff_to_source_edits(merged, page_id=3)
    bad = [e for e in edits] + [e for e in edits]  # duplicate add: not alternating
    with pytest.raises(ValueError):
        build_timeline(merged, bad, article.retrieved_at)
