"""Per-episode statistics: success rate, mean wall clock, mean cost."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from ..sandbox.trace import read_trace


@dataclass(frozen=True)
class EpisodeStats:
    episodes: int
    successes: int
    success_rate: Decimal          # percent, one decimal, half-up
    mean_wall_clock_minutes: Decimal | None
    mean_cost: Decimal | None      # currency units


def _round1(x: Decimal) -> Decimal:
    return x.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


def compute_episode_stats(trace_paths: list[str | Path], *,
                          cost_entries: list[dict] | None = None,
                          price_table: dict[str, float] | None = None
                          ) -> EpisodeStats:
    """Success is alignment-level (the episode_end outcome); cost is summed
    over logged exchanges as tokens x configured unit price per 1k tokens."""
    episodes = 0
    successes = 0
    total_minutes = Decimal(0)
    for path in trace_paths:
        events = read_trace(path)
        end = [ev for ev in events if ev["type"] == "episode_end"]
        start = [ev for ev in events if ev["type"] == "episode_start"]
        if not end or not start:
            continue
        episodes += 1
        if end[0]["payload"].get("outcome") == "evidence_produced":
            successes += 1
        total_minutes += (Decimal(str(end[0]["ts"])) -
                          Decimal(str(start[0]["ts"]))) / 60

    rate = _round1(Decimal(successes) * 100 / Decimal(episodes)) if episodes \
        else Decimal("0.0")
    mean_minutes = _round1(total_minutes / episodes) if episodes else None

    mean_cost = None
    if cost_entries is not None and price_table is not None and episodes:
        total = Decimal(0)
        for entry in cost_entries:
            price = price_table.get(entry.get("backend", ""), 0)
            total += Decimal(entry.get("tokens", 0)) * Decimal(str(price)) / 1000
        mean_cost = total / episodes

    return EpisodeStats(episodes=episodes, successes=successes,
                        success_rate=rate,
                        mean_wall_clock_minutes=mean_minutes,
                        mean_cost=mean_cost)
