"""Analysis-backend handles: live HTTP chat and deterministic mock replay.

The exchange protocol is minimal by design (system text, user text, schema
descriptor in; text out); schema enforcement always lives engine-side. See
docs/backend-protocol.md.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import requests

from ..errors import BackendUnavailable


def request_digest(system: str, user: str, schema: str) -> str:
    canonical = json.dumps({"system": system, "user": user, "schema": schema},
                           sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ExchangeLog:
    """Verbatim JSONL log of every backend exchange."""

    def __init__(self, path: str | Path | None, backend_name: str, clock=time.time):
        self.path = Path(path) if path else None
        self.backend_name = backend_name
        self.clock = clock
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, *, schema: str, digest: str, request: dict, response: str,
               tokens: int, episode_id: str | None = None) -> None:
        if not self.path:
            return
        entry = {"ts": self.clock(), "backend": self.backend_name,
                 "schema": schema, "request_digest": digest,
                 "request": request, "response": response, "tokens": tokens,
                 "episode_id": episode_id}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def read_exchange_log(path: str | Path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        return []
    return [json.loads(line) for line in p.read_text().splitlines() if line.strip()]


class MockReplayBackend:
    """Fully deterministic backend replaying fixture responses.

    Responses are looked up by exact request digest first; otherwise by
    schema name from the script, where a string replays every time and a
    list is consumed in call order (call order is fixed for a fixed
    pipeline, so replay stays deterministic).
    """

    kind = "mock_replay"

    def __init__(self, *, digest_map: dict[str, str] | None = None,
                 script: dict[str, object] | None = None,
                 log_path: str | Path | None = None,
                 name: str = "mock", clock=time.time):
        self.digest_map = digest_map or {}
        self.script = dict(script or {})
        self._cursors: dict[str, int] = {}
        self.log = ExchangeLog(log_path, name, clock=clock)
        self.current_episode_id: str | None = None

    @classmethod
    def from_script_file(cls, path: str | Path, **kwargs) -> "MockReplayBackend":
        data = json.loads(Path(path).read_text())
        return cls(digest_map=data.get("by_digest"), script=data.get("by_schema"),
                   **kwargs)

    def complete(self, *, system: str, user: str, schema: str) -> str:
        digest = request_digest(system, user, schema)
        if digest in self.digest_map:
            text = self.digest_map[digest]
        elif schema in self.script:
            entry = self.script[schema]
            if isinstance(entry, list):
                idx = min(self._cursors.get(schema, 0), len(entry) - 1)
                self._cursors[schema] = idx + 1
                text = entry[idx]
            else:
                text = str(entry)
        else:
            raise BackendUnavailable(
                f"mock backend has no fixture for schema {schema!r} "
                f"(digest {digest[:12]})")
        if not isinstance(text, str):
            text = json.dumps(text, sort_keys=True)
        self.log.record(schema=schema, digest=digest,
                        request={"system": system, "user": user, "schema": schema},
                        response=text, tokens=(len(user) + len(text)) // 4,
                        episode_id=self.current_episode_id)
        return text


class HttpChatBackend:
    """Client for a chat-style HTTP endpoint.

    POST {endpoint} with {"system", "user", "schema", "model"}; expects
    {"text": str, "usage": {"total_tokens": int}?}. Credentials come only
    from the environment variable named by ``api_key_env``.
    """

    kind = "http_chat"

    def __init__(self, endpoint: str, *, model: str | None = None,
                 api_key_env: str = "CLAIMCHECK_API_KEY",
                 log_path: str | Path | None = None,
                 name: str | None = None, timeout: float = 120.0,
                 clock=time.time):
        import os
        self.endpoint = endpoint
        self.model = model
        self.api_key = os.environ.get(api_key_env)
        self.timeout = timeout
        self.log = ExchangeLog(log_path, name or model or "http", clock=clock)
        self.current_episode_id: str | None = None

    def complete(self, *, system: str, user: str, schema: str) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"system": system, "user": user, "schema": schema}
        if self.model:
            payload["model"] = self.model
        try:
            resp = requests.post(self.endpoint, json=payload, headers=headers,
                                 timeout=self.timeout)
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as e:
            raise BackendUnavailable(str(e)) from e
        text = body.get("text", "")
        tokens = body.get("usage", {}).get("total_tokens",
                                           (len(user) + len(text)) // 4)
        self.log.record(schema=schema,
                        digest=request_digest(system, user, schema),
                        request=payload, response=text, tokens=tokens,
                        episode_id=self.current_episode_id)
        return text
