"""Revision fetcher: batching, resumable cursors, request spacing."""

import json

import pytest

from wikirel.fetch import RevisionFetcher


class FakeResponse:
    def __init__(self, payload: dict):
        self.payload = payload

    def raise_for_status(self) -> None:
        pass

    def json(self) -> dict:
        return self.payload


class FakeSession:
    """Replays scripted payloads and records every request's params."""

    def __init__(self, payloads: list[dict]):
        self.payloads = list(payloads)
        self.calls: list[dict] = []

    def get(self, url: str, params: dict) -> FakeResponse:
        self.calls.append(dict(params))
        return FakeResponse(self.payloads.pop(0))


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps: list[float] = []

    def __call__(self) -> float:
        return self.now

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.now += seconds


def batch(revisions, cursor=None) -> dict:
    payload = {"query": {"pages": {"1": {"revisions": revisions}}}}
    if cursor:
        payload["continue"] = {"rvcontinue": cursor}
    return payload


def make_fetcher(payloads, tmp_path=None, **kw):
    session = FakeSession(payloads)
    clock = FakeClock()
    fetcher = RevisionFetcher(
        "https://wiki.example/api.php",
        session=session,
        cursor_path=(tmp_path / "cursors.json") if tmp_path else None,
        sleep=clock.sleep,
        clock=clock,
        **kw,
    )
    return fetcher, session, clock


def test_single_batch_yields_all_revisions():
    revisions = [{"revid": i} for i in range(3)]
    fetcher, session, _ = make_fetcher([batch(revisions)])
    assert list(fetcher.fetch_page_revisions(title="Page")) == revisions
    (call,) = session.calls
    assert call["titles"] == "Page"
    assert call["rvdir"] == "newer"
    assert "rvcontinue" not in call


def test_continuation_until_cursor_runs_out():
    fetcher, session, _ = make_fetcher(
        [
            batch([{"revid": 1}], cursor="c1"),
            batch([{"revid": 2}], cursor="c2"),
            batch([{"revid": 3}]),
        ]
    )
    got = [r["revid"] for r in fetcher.fetch_page_revisions(page_id=7)]
    assert got == [1, 2, 3]
    assert [c.get("rvcontinue") for c in session.calls] == [None, "c1", "c2"]
    assert all(c["pageids"] == 7 for c in session.calls)


def test_cursor_file_survives_interruption(tmp_path):
    # first run dies after one batch; the stored cursor must resume the crawl
    fetcher, _, _ = make_fetcher([batch([{"revid": 1}], cursor="c1")], tmp_path)
    iterator = fetcher.fetch_page_revisions(title="Page")
    assert next(iterator)["revid"] == 1
    with pytest.raises(IndexError):  # fake session has no second payload
        next(iterator)
    stored = json.loads((tmp_path / "cursors.json").read_text(encoding="utf-8"))
    assert stored == {"Page": "c1"}

    resumed, session, _ = make_fetcher([batch([{"revid": 2}])], tmp_path)
    assert [r["revid"] for r in resumed.fetch_page_revisions(title="Page")] == [2]
    assert session.calls[0]["rvcontinue"] == "c1"
    # a finished crawl clears its cursor
    stored = json.loads((tmp_path / "cursors.json").read_text(encoding="utf-8"))
    assert stored == {}


def test_cursors_are_kept_per_page(tmp_path):
    for selector, cursor in (({"title": "A"}, "pa"), ({"page_id": 2}, "pb")):
        fetcher, _, _ = make_fetcher([batch([{"revid": 1}], cursor=cursor)], tmp_path)
        iterator = fetcher.fetch_page_revisions(**selector)
        next(iterator)
        with pytest.raises(IndexError):  # cursor stored, then the fake runs dry
            next(iterator)
    stored = json.loads((tmp_path / "cursors.json").read_text(encoding="utf-8"))
    assert stored == {"A": "pa", "pageid:2": "pb"}


def test_throttle_enforces_min_interval():
    fetcher, _, clock = make_fetcher(
        [batch([{"revid": 1}], cursor="c1"), batch([{"revid": 2}])],
        min_interval=0.5,
    )
    list(fetcher.fetch_page_revisions(title="Page"))
    # the second request comes immediately after the first on the fake clock
    assert clock.sleeps == [pytest.approx(0.5)]


def test_no_sleep_when_requests_are_naturally_spaced():
    fetcher, _, clock = make_fetcher(
        [batch([{"revid": 1}], cursor="c1"), batch([{"revid": 2}])],
        min_interval=0.5,
    )
    iterator = fetcher.fetch_page_revisions(title="Page")
    next(iterator)
    clock.now += 10.0
    with pytest.raises(StopIteration):
        while True:
            next(iterator)
    assert clock.sleeps == []


def test_minimum_spacing_is_enforced_at_construction():
    with pytest.raises(ValueError, match="100 ms"):
        RevisionFetcher("https://wiki.example/api.php", min_interval=0.01)


def test_exactly_one_page_selector_required():
    fetcher, _, _ = make_fetcher([])
    with pytest.raises(ValueError, match="exactly one"):
        next(fetcher.fetch_page_revisions())
    with pytest.raises(ValueError, match="exactly one"):
        next(fetcher.fetch_page_revisions(title="A", page_id=1))


def test_batch_size_and_rvprop_are_forwarded():
    fetcher, session, _ = make_fetcher([batch([])], batch_size=42, rvprop="ids")
    list(fetcher.fetch_page_revisions(title="Page"))
    assert session.calls[0]["rvlimit"] == 42
    assert session.calls[0]["rvprop"] == "ids"
