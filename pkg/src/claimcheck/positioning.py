"""Literature positioning: local comparison set and technical-role summary."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .docmodel import Manuscript, normalize_token
from .errors import SchemaViolation, SearchUnavailable

NOVELTY_MODES = ("new mechanism", "new combination", "empirical improvement")
NEIGHBOR_SOURCES = ("citation", "baseline", "retrieved")

POSITION_SCHEMA_NAME = "position.v1"


@dataclass(frozen=True)
class NeighborPaper:
    source: str
    title: str
    year: int | None = None
    abstract: str | None = None
    relation_note: str = ""


@dataclass(frozen=True)
class ComparisonSet:
    neighbors: tuple[NeighborPaper, ...]
    family_labels: tuple[str, ...] = ()
    built_at: float = 0.0
    degraded: bool = False


@dataclass(frozen=True)
class DesignAxis:
    axis: str
    submission_choice: str
    neighbor_choices: str


@dataclass(frozen=True)
class PositionSummary:
    role_statement: str
    design_axes: tuple[DesignAxis, ...]
    novelty_mode: str
    low_confidence: bool = False


def _baseline_keys(m: Manuscript) -> set[str]:
    """Citations whose key or title token appears in a results-table row header."""
    headers: set[str] = set()
    for t in m.tables:
        for row in t.cells:
            if row:
                headers.add(normalize_token(row[0]))
        if t.cells:
            headers.update(normalize_token(c) for c in t.cells[0])
    hits: set[str] = set()
    for c in m.biblio:
        key_norm = normalize_token(c.key)
        if any(key_norm and key_norm in h for h in headers):
            hits.add(c.key)
            continue
        title_head = normalize_token(c.title)
        if any(h and (h in title_head or title_head.startswith(h)) for h in headers if h):
            hits.add(c.key)
    return hits


def build_comparison_set(m: Manuscript, search, *, cap: int = 25,
                         clock=time.time) -> ComparisonSet:
    """Assemble cited, baseline, and retrieved neighbors, deduplicated and capped.

    If the search handle is down, degrades to citations/baselines only and sets
    the degraded flag rather than failing.
    """
    baseline = _baseline_keys(m)
    neighbors: list[NeighborPaper] = []
    for c in m.biblio:
        source = "baseline" if c.key in baseline else "citation"
        note = ("named baseline in a results table" if source == "baseline"
                else "cited by the submission")
        neighbors.append(NeighborPaper(source=source, title=c.title,
                                       year=c.year, relation_note=note))
    degraded = False
    query = m.title
    if m.sections and m.sections[0].spans:
        query += " " + m.sections[0].spans[0].text
    try:
        for rec in search.search(query, cap):
            neighbors.append(NeighborPaper(
                source="retrieved", title=str(rec["title"]),
                year=rec.get("year"), abstract=rec.get("abstract"),
                relation_note="semantically similar (retrieved)"))
    except SearchUnavailable:
        degraded = True

    deduped: list[NeighborPaper] = []
    seen: set[str] = set()
    for n in neighbors:
        key = normalize_token(n.title)
        if key and key not in seen:
            seen.add(key)
            deduped.append(n)
    return ComparisonSet(neighbors=tuple(deduped[:cap]), built_at=clock(),
                         degraded=degraded)


def summarize_position(m: Manuscript, cs: ComparisonSet, backend, *,
                       retry_budget: int = 2) -> PositionSummary:
    """Backend-written role statement, schema-validated with retries."""
    neighbor_lines = "\n".join(
        f"- [{n.source}] {n.title}" for n in cs.neighbors) or "(none)"
    user = (f"Submission: {m.title}\nNeighbors:\n{neighbor_lines}\n\n"
            "Describe the submission's technical role relative to the neighbors "
            "as JSON with keys role_statement, novelty_mode, design_axes.")
    last: list[str] = []
    for _ in range(retry_budget + 1):
        prompt = user
        if last:
            prompt += "\n\nPrevious output violated the schema:\n" + "\n".join(
                f"- {v}" for v in last)
        text = backend.complete(
            system="You position a submission against nearby work; no novelty score.",
            user=prompt, schema=POSITION_SCHEMA_NAME)
        last = []
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            last = ["response is not valid JSON"]
            continue
        if not isinstance(raw, dict):
            last = ["response must be a JSON object"]
            continue
        role = str(raw.get("role_statement", "")).strip()
        mode = raw.get("novelty_mode")
        axes_raw = raw.get("design_axes", [])
        if not role:
            last.append("role_statement missing or empty")
        if mode not in NOVELTY_MODES:
            last.append(f"novelty_mode outside closed set: {mode!r}")
        axes: list[DesignAxis] = []
        for a in axes_raw:
            if not isinstance(a, dict) or not a.get("axis"):
                last.append("malformed design axis")
                continue
            axes.append(DesignAxis(
                axis=str(a["axis"]),
                submission_choice=str(a.get("submission_choice", "")),
                neighbor_choices=str(a.get("neighbor_choices", ""))))
        low_confidence = not cs.neighbors
        if cs.neighbors and not last:
            norm_role = normalize_token(role)
            if not any(normalize_token(n.title) in norm_role for n in cs.neighbors):
                last.append("role_statement references no neighbor by title")
        if last:
            continue
        return PositionSummary(role_statement=role, design_axes=tuple(axes),
                               novelty_mode=mode, low_confidence=low_confidence)
    raise SchemaViolation(
        f"position summary failed schema validation after {retry_budget} retries", last)
