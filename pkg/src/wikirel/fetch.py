"""Thin client for a MediaWiki-compatible revisions endpoint.

Optional plumbing: acceptance never exercises it against a live service. The
client enforces a minimum spacing between requests and persists a resumable
continuation cursor per page, so interrupted crawls pick up where they left
off. The HTTP session, clock, and sleep function are injectable for testing.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Callable, Iterator

import requests

DEFAULT_RVPROP = "ids|timestamp|user|flags|content"


class RevisionFetcher:
    def __init__(
        self,
        base_url: str,
        session: requests.Session | None = None,
        min_interval: float = 0.1,
        batch_size: int = 500,
        rvprop: str = DEFAULT_RVPROP,
        cursor_path: str | Path | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ):
        if min_interval < 0.1:
            raise ValueError("request spacing below 100 ms is not allowed")
        self.base_url = base_url
        self.session = session or requests.Session()
        self.min_interval = min_interval
        self.batch_size = batch_size
        self.rvprop = rvprop
        self.cursor_path = Path(cursor_path) if cursor_path else None
        self._sleep = sleep
        self._clock = clock
        self._last_request: float | None = None

    def _load_cursors(self) -> dict[str, str]:
        if self.cursor_path and self.cursor_path.exists():
            return json.loads(self.cursor_path.read_text(encoding="utf-8"))
        return {}

    def _store_cursor(self, key: str, value: str | None) -> None:
        if not self.cursor_path:
            return
        cursors = self._load_cursors()
        if value is None:
            cursors.pop(key, None)
        else:
            cursors[key] = value
        self.cursor_path.write_text(
            json.dumps(cursors, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def _throttle(self) -> None:
        if self._last_request is not None:
            elapsed = self._clock() - self._last_request
            if elapsed < self.min_interval:
                self._sleep(self.min_interval - elapsed)
        self._last_request = self._clock()

    def _request(self, params: dict) -> dict:
        self._throttle()
        response = self.session.get(self.base_url, params=params)
        response.raise_for_status()
        return response.json()

    def fetch_page_revisions(
        self, title: str | None = None, page_id: int | None = None
    ) -> Iterator[dict]:
        """Yield raw revision objects oldest-first, resuming from any stored cursor."""
        if (title is None) == (page_id is None):
            raise ValueError("pass exactly one of title/page_id")
        key = title if title is not None else f"pageid:{page_id}"
        params: dict = {
            "action": "query",
            "format": "json",
            "prop": "revisions",
            "rvlimit": self.batch_size,
            "rvprop": self.rvprop,
            "rvdir": "newer",
        }
        if title is not None:
            params["titles"] = title
        else:
            params["pageids"] = page_id
        cursor = self._load_cursors().get(key)
        if cursor:
            params["rvcontinue"] = cursor

        while True:
            payload = self._request(params)
            pages = payload.get("query", {}).get("pages", {})
            for page in pages.values():
                yield from page.get("revisions", [])
            next_cursor = payload.get("continue", {}).get("rvcontinue")
            self._store_cursor(key, next_cursor)
            if not next_cursor:
                return
            params["rvcontinue"] = next_cursor
