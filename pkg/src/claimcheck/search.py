"""Scholarly search handles: a live HTTP client and an offline fixture provider.

Both return records shaped as ``{"title", "year", "abstract", "venue"}``
(see docs/search-api.md).
"""

from __future__ import annotations

import json
from pathlib import Path

import requests

from .docmodel import normalize_token
from .errors import SearchUnavailable


class HttpScholarlySearch:
    """Client for an HTTP search endpoint: GET {endpoint}?query=...&limit=N."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def search(self, query: str, limit: int) -> list[dict]:
        try:
            resp = requests.get(self.endpoint,
                                params={"query": query, "limit": limit},
                                timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as e:
            raise SearchUnavailable(str(e)) from e
        records = payload.get("results", payload if isinstance(payload, list) else [])
        return [r for r in records if isinstance(r, dict) and r.get("title")][:limit]


class FixtureScholarlySearch:
    """Offline provider replaying records from a local JSON file.

    File layout: ``{"queries": [{"query_contains": str, "results": [...]}],
    "default": [...]}``. The first entry whose ``query_contains`` token occurs
    in the normalized query wins; otherwise ``default`` (or empty) is returned.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.exists():
            raise SearchUnavailable(f"search fixture not found: {path}")
        self._data = json.loads(self.path.read_text())

    def search(self, query: str, limit: int) -> list[dict]:
        norm = normalize_token(query)
        for entry in self._data.get("queries", []):
            if normalize_token(entry.get("query_contains", "")) in norm:
                return list(entry.get("results", []))[:limit]
        return list(self._data.get("default", []))[:limit]


class UnavailableSearch:
    """Handle that always fails; used to exercise the degraded path."""

    def search(self, query: str, limit: int) -> list[dict]:
        raise SearchUnavailable("search handle disabled")
