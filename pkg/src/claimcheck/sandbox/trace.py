"""Append-only episode trace: line-delimited JSON events with monotone
sequence numbers (schema in docs/trace-schema.md).

An episode value can be reconstructed solely from its trace file; the
in-memory episode is built through the same reconstruction path so the two
are equal field-by-field.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from ..errors import IncompleteTrace
from .types import (ArtifactRef, EnvSpec, ExecutionRecord, RepairAction, Task,
                    VerificationEpisode, Workspace)

TRACE_SCHEMA_VERSION = 1
REPAIR_POLICY_VERSION = 1

EVENT_TYPES = ("episode_start", "artifact_resolved", "env_step", "task_start",
               "task_end", "repair_proposed", "repair_applied",
               "repair_refused", "archive", "episode_end")


class TraceWriter:
    """Single-writer append-only event log for one episode."""

    def __init__(self, path: str | Path, clock=time.time):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = 0
        self._clock = clock
        self.events: list[dict] = []

    def emit(self, event_type: str, payload: dict) -> dict:
        if event_type not in EVENT_TYPES:
            raise ValueError(f"unknown trace event type: {event_type}")
        self._seq += 1
        event = {"seq": self._seq, "ts": self._clock(), "type": event_type,
                 "payload": payload}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
        self.events.append(event)
        return event


def read_trace(path: str | Path) -> list[dict]:
    events = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    return events


def reconstruct_episode(events: list[dict], trace_path: str) -> VerificationEpisode:
    """Rebuild a VerificationEpisode from its event stream."""
    start = _single(events, "episode_start")
    end = _single(events, "episode_end")
    sp = start["payload"]
    ep = end["payload"]

    artifact = ArtifactRef.from_dict(sp["artifact"])
    for ev in events:
        if ev["type"] == "artifact_resolved" and "digest" in ev["payload"]:
            artifact = ArtifactRef(source=artifact.source,
                                   revision=artifact.revision,
                                   resolved_digest=ev["payload"]["digest"])

    records = tuple(ExecutionRecord.from_dict(ev["payload"])
                    for ev in events if ev["type"] == "task_end")
    repairs = tuple(RepairAction.from_dict(ev["payload"]["action"])
                    for ev in events if ev["type"] == "repair_applied")
    return VerificationEpisode(
        episode_id=sp["episode_id"],
        artifact=artifact,
        workspace=Workspace.from_dict(sp["workspace"]),
        env=EnvSpec.from_dict(ep.get("env", {})),
        plan=tuple(Task.from_dict(t) for t in ep.get("plan", [])),
        records=records,
        repairs=repairs,
        outcome=ep["outcome"],
        trace_path=trace_path,
    )


def load_episode(path: str | Path) -> VerificationEpisode:
    return reconstruct_episode(read_trace(path), str(path))


def _single(events: list[dict], event_type: str) -> dict:
    found = [ev for ev in events if ev["type"] == event_type]
    if not found:
        raise IncompleteTrace(f"trace has no {event_type} event")
    return found[0]
