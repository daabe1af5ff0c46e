"""Failure taxonomy: classify failed episodes and tabulate the distribution.

Three levels, one primary type per failed episode, keyed to the earliest
blocking event in the trace: artifact_level (resolution / no runnable tasks),
execution_level (environment build, dependency, timeout, nonzero exit),
interpretation_level (tasks ran but nothing aligned to a claim).
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .errors import IncompleteTrace

ARTIFACT_LEVEL = "artifact_level"
EXECUTION_LEVEL = "execution_level"
INTERPRETATION_LEVEL = "interpretation_level"
FAILURE_TYPES = (ARTIFACT_LEVEL, EXECUTION_LEVEL, INTERPRETATION_LEVEL)

NOT_FAILED = "not_failed"

# Stage-of-blocking-event to failure-type mapping; explicit config because the
# source examples name failure classes per type, not an exhaustive rule.
DEFAULT_STAGE_MAP = {
    "artifact": ARTIFACT_LEVEL,
    "plan": ARTIFACT_LEVEL,
    "environment": EXECUTION_LEVEL,
    "task": EXECUTION_LEVEL,
}


@dataclass(frozen=True)
class FailureRecord:
    episode_id: str
    failure_type: str
    blocking_event: int
    note: str


@dataclass(frozen=True)
class FailureTabulation:
    counts: dict[str, int]
    total_failures: int
    total_episodes: int
    failure_shares: dict[str, Decimal]
    episode_shares: dict[str, Decimal]
    total_failure_share_of_episodes: Decimal


def classify_failure(events: list[dict],
                     stage_map: dict[str, str] | None = None) -> FailureRecord | str:
    """Classify a completed trace; returns NOT_FAILED for successful episodes.

    Classification depends only on events up to and including the blocking
    event, so permuting later events cannot change it.
    """
    stage_map = stage_map or DEFAULT_STAGE_MAP
    end = [ev for ev in events if ev["type"] == "episode_end"]
    start = [ev for ev in events if ev["type"] == "episode_start"]
    if not end or not start:
        raise IncompleteTrace("trace lacks episode_start/episode_end")
    end_ev = end[0]
    episode_id = start[0]["payload"].get("episode_id", "")

    if end_ev["payload"].get("outcome") == "evidence_produced":
        return NOT_FAILED

    # Earliest blocking event wins.
    final_codes = _final_return_codes(events)
    for ev in sorted(events, key=lambda e: e["seq"]):
        if ev["type"] == "artifact_resolved" and "error" in ev["payload"]:
            return FailureRecord(episode_id, stage_map["artifact"], ev["seq"],
                                 ev["payload"].get("detail", ev["payload"]["error"]))
        if ev["type"] == "env_step" and (
                "error" in ev["payload"] or ev["payload"].get("return_code", 0) != 0):
            return FailureRecord(episode_id, stage_map["environment"], ev["seq"],
                                 ev["payload"].get("error", "environment step failed"))
        if ev["type"] == "task_end":
            p = ev["payload"]
            if p.get("timed_out"):
                return FailureRecord(episode_id, stage_map["task"], ev["seq"],
                                     f"task {p['task_id']} exceeded its budget")
            if p.get("return_code", 0) != 0 and final_codes.get(p["task_id"], 0) != 0:
                return FailureRecord(episode_id, stage_map["task"], ev["seq"],
                                     f"task {p['task_id']} exited "
                                     f"{p['return_code']} after repair budget")
    err = end_ev["payload"].get("error")
    if err:
        stage = err.get("stage", "artifact")
        return FailureRecord(episode_id, stage_map.get(stage, ARTIFACT_LEVEL),
                             end_ev["seq"], err.get("detail", err.get("type", "")))
    return FailureRecord(episode_id, INTERPRETATION_LEVEL, end_ev["seq"],
                         "tasks completed but no output aligned to a claim")


def _final_return_codes(events: list[dict]) -> dict[str, int]:
    codes: dict[str, int] = {}
    for ev in events:
        if ev["type"] == "task_end":
            codes[ev["payload"]["task_id"]] = ev["payload"].get("return_code", 0)
    return codes


def _share(count: int, total: int) -> Decimal:
    if total == 0:
        return Decimal("0.0")
    return (Decimal(count) * 100 / Decimal(total)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP)


def tabulate_failures(records: list[FailureRecord],
                      total_episodes: int) -> FailureTabulation:
    counts = {t: 0 for t in FAILURE_TYPES}
    for r in records:
        counts[r.failure_type] += 1
    total_failures = len(records)
    return FailureTabulation(
        counts=counts,
        total_failures=total_failures,
        total_episodes=total_episodes,
        failure_shares={t: _share(counts[t], total_failures) for t in FAILURE_TYPES},
        episode_shares={t: _share(counts[t], total_episodes) for t in FAILURE_TYPES},
        total_failure_share_of_episodes=_share(total_failures, total_episodes),
    )


def render_failure_table(tab: FailureTabulation) -> str:
    """Plain-text table mirroring the structured report section."""
    names = {ARTIFACT_LEVEL: "Artifact-level",
             EXECUTION_LEVEL: "Execution-level",
             INTERPRETATION_LEVEL: "Interpretation-level"}
    lines = [f"{'Failure Type':<22}{'Count':>6}{'Failures (%)':>14}{'All Episodes (%)':>18}"]
    for t in FAILURE_TYPES:
        lines.append(f"{names[t]:<22}{tab.counts[t]:>6}"
                     f"{str(tab.failure_shares[t]):>14}{str(tab.episode_shares[t]):>18}")
    lines.append(f"{'Total':<22}{tab.total_failures:>6}"
                 f"{'100.0' if tab.total_failures else '0.0':>14}"
                 f"{str(tab.total_failure_share_of_episodes):>18}")
    return "\n".join(lines)
