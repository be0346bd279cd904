import json
from datetime import datetime, timezone

import pytest

from wikirel.corpus import (
    ArticleHistory,
    Dataset,
    FixtureError,
    RevisionRecord,
    dataset_age_totals,
    days_between,
    dump_corpus,
    format_timestamp,
    load_corpus,
    parse_timestamp,
    with_tier,
)


def rev(rev_id, user="Ada", ts="2020-01-01T00:00:00Z", urls=(), page_id=1,
        registered=True, parent=None, wikitext=None):
    payload = {"wikitext": wikitext} if wikitext is not None else {"urls": tuple(urls)}
    return RevisionRecord(
        language="en", topic="t", page_id=page_id, page_title="A",
        rev_id=rev_id, parent_id=parent, timestamp=parse_timestamp(ts),
        user=user, registered=registered, **payload,
    )


def test_timestamp_round_trip():
    instant = parse_timestamp("2021-06-05T04:03:02Z")
    assert instant == datetime(2021, 6, 5, 4, 3, 2, tzinfo=timezone.utc)
    assert format_timestamp(instant) == "2021-06-05T04:03:02Z"


def test_timestamp_rejects_other_shapes():
    for bad in ("2021-06-05", "2021-06-05 04:03:02", "not a date", ""):
        with pytest.raises(ValueError):
            parse_timestamp(bad)


def test_days_between_uses_fixed_day_length():
    a = parse_timestamp("2020-01-01T00:00:00Z")
    b = parse_timestamp("2020-01-02T12:00:00Z")
    assert days_between(a, b) == 1.5


def test_revision_payload_exclusivity():
    with pytest.raises(ValueError):
        RevisionRecord(
            language="en", topic="t", page_id=1, page_title="A", rev_id=1,
            parent_id=None, timestamp=parse_timestamp("2020-01-01T00:00:00Z"),
            user="Ada", registered=True, urls=("https://a.com/x",), wikitext="hi",
        )
    with pytest.raises(ValueError):
        RevisionRecord(
            language="en", topic="t", page_id=1, page_title="A", rev_id=1,
            parent_id=None, timestamp=parse_timestamp("2020-01-01T00:00:00Z"),
            user="Ada", registered=True,
        )


def test_revision_dict_round_trip():
    record = rev(7, urls=("https://a.com/x",), parent=6)
    assert RevisionRecord.from_dict(record.to_dict()) == record
    wiki = rev(8, wikitext="see https://a.com/x")
    assert RevisionRecord.from_dict(wiki.to_dict()) == wiki


def test_article_rejects_retrieval_before_last_revision():
    with pytest.raises(ValueError):
        ArticleHistory(
            page_id=1, page_title="A",
            revisions=(rev(1, ts="2020-05-01T00:00:00Z"),),
            retrieved_at=parse_timestamp("2020-04-01T00:00:00Z"),
        )


def test_merged_revision_count_counts_user_runs():
    revisions = tuple(
        rev(i + 1, user=u, ts=f"2020-01-{i + 1:02d}T00:00:00Z")
        for i, u in enumerate(["A", "A", "A", "B", "B", "C", "A", "A", "C"])
    )
    article = ArticleHistory(
        page_id=1, page_title="A", revisions=revisions,
        retrieved_at=parse_timestamp("2020-02-01T00:00:00Z"),
    )
    assert article.merged_revision_count() == 5


def test_dataset_age_totals():
    a1 = ArticleHistory(
        page_id=1, page_title="A",
        revisions=(rev(1, user="A"), rev(2, user="A", ts="2020-01-03T00:00:00Z"),
                   rev(3, user="B", ts="2020-01-05T00:00:00Z")),
        retrieved_at=parse_timestamp("2020-01-11T00:00:00Z"),
    )
    a2 = ArticleHistory(
        page_id=2, page_title="B",
        revisions=(rev(4, user="10.1.1.1", page_id=2, registered=False),),
        retrieved_at=parse_timestamp("2020-01-06T00:00:00Z"),
    )
    totals = dataset_age_totals(Dataset(topic="t", language="en", articles=(a1, a2)))
    assert totals.article_days == 10.0 + 5.0
    assert totals.article_revisions == 2 + 1
    assert totals.unique_users == 3


def test_load_corpus_groups_sorts_and_attaches_meta(tmp_path):
    lines = [
        {"meta": {"page_id": 1, "retrieved_at": "2020-03-01T00:00:00Z"}},
        # out of order on purpose; loader must sort by (timestamp, rev_id)
        rev(2, ts="2020-01-05T00:00:00Z", parent=1).to_dict(),
        rev(1, ts="2020-01-01T00:00:00Z").to_dict(),
        {**rev(3, ts="2020-01-02T00:00:00Z", page_id=2).to_dict(), "topic": "u"},
    ]
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(json.dumps(obj) for obj in lines), encoding="utf-8")
    datasets = load_corpus(path)
    assert [d.key for d in datasets] == [("t", "en"), ("u", "en")]
    article = datasets[0].articles[0]
    assert [r.rev_id for r in article.revisions] == [1, 2]
    assert article.retrieved_at == parse_timestamp("2020-03-01T00:00:00Z")
    # no meta line: retrieval falls back to the last revision timestamp
    assert datasets[1].articles[0].retrieved_at == parse_timestamp("2020-01-02T00:00:00Z")


def test_load_corpus_rejects_duplicate_rev_ids(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(
        json.dumps(rev(1).to_dict()) + "\n" + json.dumps(rev(1).to_dict()),
        encoding="utf-8",
    )
    with pytest.raises(FixtureError, match="duplicate revision id"):
        load_corpus(path)


def test_load_corpus_rejects_parent_timestamp_regression(tmp_path):
    path = tmp_path / "c.jsonl"
    lines = [
        rev(5, ts="2020-02-01T00:00:00Z").to_dict(),
        rev(6, ts="2020-01-01T00:00:00Z", parent=5).to_dict(),
    ]
    path.write_text("\n".join(json.dumps(o) for o in lines), encoding="utf-8")
    with pytest.raises(FixtureError, match="predates its parent"):
        load_corpus(path)


def test_load_corpus_rejects_bad_json_with_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("{\"meta\": }\n", encoding="utf-8")
    with pytest.raises(FixtureError) as excinfo:
        load_corpus(path)
    assert ":1:" in str(excinfo.value)


def test_load_corpus_rejects_ambiguous_meta(tmp_path):
    lines = [
        {"meta": {"page_id": 1, "retrieved_at": "2020-03-01T00:00:00Z"}},
        rev(1).to_dict(),
        {**rev(2, ts="2020-01-02T00:00:00Z").to_dict(), "topic": "other"},
    ]
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(json.dumps(o) for o in lines), encoding="utf-8")
    with pytest.raises(FixtureError, match="ambiguous"):
        load_corpus(path)


def test_load_corpus_missing_file():
    with pytest.raises(FixtureError, match="no such file"):
        load_corpus("/nonexistent/corpus.jsonl")


def test_load_corpus_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError, match="format"):
        load_corpus(tmp_path / "x.jsonl", format="parquet")


def test_dump_load_round_trip(tmp_path):
    a1 = ArticleHistory(
        page_id=1, page_title="A",
        revisions=(rev(1, urls=("https://a.com/x",)),
                   rev(2, user="B", ts="2020-01-02T00:00:00Z", parent=1,
                       wikitext="see https://b.org/y")),
        retrieved_at=parse_timestamp("2020-02-01T00:00:00Z"),
    )
    dataset = Dataset(topic="t", language="en", articles=(a1,))
    path = tmp_path / "c.jsonl"
    dump_corpus([dataset], path)
    loaded = load_corpus(path)
    assert loaded == [dataset]


def test_with_tier_validates():
    dataset = Dataset(topic="t", language="en", articles=(
        ArticleHistory(page_id=1, page_title="A", revisions=(rev(1),),
                       retrieved_at=parse_timestamp("2020-02-01T00:00:00Z")),
    ))
    assert with_tier(dataset, "high").tier == "high"
    with pytest.raises(ValueError):
        with_tier(dataset, "ultra")
