import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wikirel.corpus import ArticleHistory, RevisionRecord, load_corpus, parse_timestamp
from wikirel.extract import (
    UrlCanonicalizer,
    analyze_article,
    apply_redirects,
    diff_to_source_edits,
    extract_domain,
    extract_urls,
    load_redirect_map,
    merge_consecutive,
    normalize_url,
)
from wikirel.psl import SuffixRules

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

RULES = SuffixRules.from_lines(["com", "org", "co.uk", "uk", "ch", "net"])


def test_extract_urls_bare_and_bracketed():
    text = (
        "Intro https://example.com/a then [http://example.org/b title] and\n"
        "<ref>https://deep.example.com/c?q=1</ref>"
    )
    assert extract_urls(text) == {
        "https://example.com/a",
        "http://example.org/b",
        "https://deep.example.com/c?q=1",
    }


def test_extract_urls_strips_trailing_punctuation():
    text = 'See https://example.com/x. Also (https://example.org/y), "https://example.net/z"!'
    assert extract_urls(text) == {
        "https://example.com/x",
        "https://example.org/y",
        "https://example.net/z",
    }


def test_extract_urls_doi_param_and_template():
    text = (
        "{{cite journal |doi=10.1000/abc123 |title=T}}\n"
        "{{doi|10.2000/xyz}}\n"
        "{{cite journal |doi=not-a-doi}}"
    )
    assert extract_urls(text) == {
        "https://doi.org/10.1000/abc123",
        "https://doi.org/10.2000/xyz",
    }


def test_extract_urls_drops_identifiers_without_urls():
    text = "{{cite book |isbn=978-3-16-148410-0 |issn=0028-0836}} ftp://host/file"
    assert extract_urls(text) == set()


def test_extract_urls_case_insensitive_scheme():
    assert extract_urls("HTTPS://Example.COM/Path") == {"HTTPS://Example.COM/Path"}


def test_extract_urls_matches_committed_manifest():
    dataset = load_corpus(FIXTURES / "wikitext_article.jsonl")[0]
    manifest = json.loads((FIXTURES / "wikitext_manifest.json").read_text())
    assert len(dataset.articles[0].revisions) == 30
    for rev in dataset.articles[0].revisions:
        assert sorted(extract_urls(rev.wikitext)) == manifest[str(rev.rev_id)]


def test_normalize_url_lowercases_and_strips():
    assert normalize_url("HTTPS://WWW.Example.COM:443/Path#frag") == "https://example.com/Path"
    assert normalize_url("http://example.com:80/a") == "http://example.com/a"
    assert normalize_url("http://example.com:8080/a") == "http://example.com:8080/a"


def test_normalize_url_percent_decoding_unreserved_only():
    # %41 is "A" (unreserved, decoded); %2F is "/" (reserved, kept)
    assert (
        normalize_url("https://example.com/a%41b%2Fc?q=%7Ex")
        == "https://example.com/aAb%2Fc?q=~x"
    )


def test_normalize_url_strips_single_www_only():
    assert normalize_url("https://www.www.example.com/") == "https://www.example.com/"
    assert normalize_url("https://www.com/") == "https://com/"


def test_normalize_url_rejects_non_http():
    assert normalize_url("ftp://example.com/a") is None
    assert normalize_url("mailto:a@example.com") is None
    assert normalize_url("https:///nohost") is None
    assert normalize_url("http://exa mple.com/a") is None


def test_redirects_longest_prefix_before_normalization():
    redirects = {
        "http://youtu.be/": "https://www.youtube.com/watch?v=",
        "http://youtu.be/special/": "https://example.com/special/",
    }
    assert (
        apply_redirects("http://youtu.be/abc", redirects)
        == "https://www.youtube.com/watch?v=abc"
    )
    # the longer prefix wins
    assert (
        apply_redirects("http://youtu.be/special/abc", redirects)
        == "https://example.com/special/abc"
    )
    # redirect applies to the raw string, then normalization runs
    assert (
        normalize_url("http://youtu.be/abc", redirects)
        == "https://youtube.com/watch?v=abc"
    )


def test_load_redirect_map(tmp_path):
    path = tmp_path / "redirects.tsv"
    path.write_text("# comment\nhttp://a/\thttp://b/\n", encoding="utf-8")
    assert load_redirect_map(path) == {"http://a/": "http://b/"}
    bad = tmp_path / "bad.tsv"
    bad.write_text("only-one-field\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_redirect_map(bad)


@settings(max_examples=200, deadline=None)
@given(
    host=st.from_regex(r"[a-z][a-z0-9]{0,8}(\.[a-z][a-z0-9]{0,8}){1,3}", fullmatch=True),
    path=st.from_regex(r"(/[A-Za-z0-9._~-]{0,6}){0,3}", fullmatch=True),
)
def test_normalize_url_idempotent(host, path):
    url = f"https://{host}{path}"
    once = normalize_url(url)
    assert once is not None
    assert normalize_url(once) == once


def test_extract_domain_uses_rules():
    assert extract_domain("https://news.bbc.co.uk/x", RULES) == "bbc.co.uk"
    assert extract_domain("http://203.0.113.7/x", RULES) == "203.0.113.7"
    with pytest.raises(ValueError):
        extract_domain("https:///nohost", RULES)


def rev(rev_id, user, ts, urls=None, wikitext=None, registered=True):
    payload = {"wikitext": wikitext} if wikitext is not None else {"urls": tuple(urls or ())}
    return RevisionRecord(
        language="en", topic="t", page_id=9, page_title="A", rev_id=rev_id,
        parent_id=rev_id - 1 if rev_id > 1 else None,
        timestamp=parse_timestamp(ts), user=user, registered=registered, **payload,
    )


def article(revisions, retrieved="2020-06-01T00:00:00Z"):
    return ArticleHistory(
        page_id=9, page_title="A", revisions=tuple(revisions),
        retrieved_at=parse_timestamp(retrieved),
    )


def test_merge_consecutive_collapses_runs_to_final_state():
    art = article([
        rev(1, "A", "2020-01-01T00:00:00Z", urls=["https://a.com/1"]),
        rev(2, "A", "2020-01-02T00:00:00Z", urls=["https://a.com/1", "https://b.org/1"]),
        rev(3, "B", "2020-01-03T00:00:00Z", urls=["https://b.org/1"]),
        rev(4, "A", "2020-01-04T00:00:00Z", urls=[]),
    ])
    merged = merge_consecutive(art, rules=RULES)
    assert [m.user for m in merged] == ["A", "B", "A"]
    assert [m.index for m in merged] == [0, 1, 2]
    # the A run keeps its final state and timestamp
    assert merged[0].urls == frozenset({"https://a.com/1", "https://b.org/1"})
    assert merged[0].timestamp == parse_timestamp("2020-01-02T00:00:00Z")
    assert merged[2].urls == frozenset()


def test_merge_ignores_elapsed_time_between_runs():
    art = article([
        rev(1, "A", "2020-01-01T00:00:00Z", urls=["https://a.com/1"]),
        rev(2, "A", "2020-05-01T00:00:00Z", urls=["https://a.com/2"]),
    ])
    assert len(merge_consecutive(art, rules=RULES)) == 1


def test_diff_emits_events_only_on_zero_crossings():
    art = article([
        # two URLs of the same domain; dropping one is not a remove event
        rev(1, "A", "2020-01-01T00:00:00Z", urls=["https://a.com/1", "https://a.com/2"]),
        rev(2, "B", "2020-01-02T00:00:00Z", urls=["https://a.com/1"]),
        rev(3, "C", "2020-01-03T00:00:00Z", urls=[]),
    ])
    merged = merge_consecutive(art, rules=RULES)
    edits = diff_to_source_edits(merged, page_id=9)
    assert [(e.domain, e.action, e.index) for e in edits] == [
        ("a.com", "add", 0),
        ("a.com", "remove", 2),
    ]
    assert edits[0].first_add and not edits[0].last_remove
    assert edits[1].last_remove


def test_diff_orders_adds_before_removes_sorted_by_domain():
    art = article([
        rev(1, "A", "2020-01-01T00:00:00Z", urls=["https://b.org/1", "https://a.com/1"]),
        rev(2, "B", "2020-01-02T00:00:00Z", urls=["https://c.net/1", "https://d.com/1"]),
    ])
    merged = merge_consecutive(art, rules=RULES)
    edits = diff_to_source_edits(merged, page_id=9)
    assert [(e.domain, e.action) for e in edits] == [
        ("a.com", "add"), ("b.org", "add"),       # revision 0, adds sorted
        ("c.net", "add"), ("d.com", "add"),       # revision 1 adds sorted...
        ("a.com", "remove"), ("b.org", "remove"),  # ...then removes sorted
    ]


def test_readdition_flags():
    art = article([
        rev(1, "A", "2020-01-01T00:00:00Z", urls=["https://a.com/1"]),
        rev(2, "B", "2020-01-02T00:00:00Z", urls=[]),
        rev(3, "C", "2020-01-03T00:00:00Z", urls=["https://a.com/1"]),
        rev(4, "D", "2020-01-04T00:00:00Z", urls=[]),
    ])
    merged = merge_consecutive(art, rules=RULES)
    edits = diff_to_source_edits(merged, page_id=9)
    assert [(e.action, e.first_add, e.last_remove) for e in edits] == [
        ("add", True, False),
        ("remove", False, False),  # re-added later: not the last remove
        ("add", False, False),
        ("remove", False, True),
    ]


def test_first_revision_diffs_against_empty():
    art = article([rev(1, "A", "2020-01-01T00:00:00Z", urls=["https://a.com/1"])])
    edits = diff_to_source_edits(merge_consecutive(art, rules=RULES), page_id=9)
    assert [(e.action, e.index, e.first_add) for e in edits] == [("add", 0, True)]


def test_canonicalizer_counts_and_dedupes_to_canonical_form():
    art = article([
        rev(1, "A", "2020-01-01T00:00:00Z",
            urls=["https://WWW.a.com/x", "https://a.com/x", "ftp://junk/x"]),
    ])
    canonicalizer = UrlCanonicalizer()
    merged = merge_consecutive(art, canonicalizer, RULES)
    # the two spellings collapse to one canonical URL; ftp is rejected
    assert merged[0].urls == frozenset({"https://a.com/x"})
    assert canonicalizer.accepted == 2 and canonicalizer.rejected == 1


def test_wikitext_payloads_flow_through_extraction():
    art = article([
        rev(1, "A", "2020-01-01T00:00:00Z",
            wikitext="<ref>{{cite web |url=https://www.a.com/x |title=T}}</ref>"),
        rev(2, "B", "2020-01-02T00:00:00Z", wikitext="no links left"),
    ])
    result = analyze_article(art, rules=RULES)
    assert [(e.domain, e.action) for e in result.edits] == [
        ("a.com", "add"), ("a.com", "remove"),
    ]
