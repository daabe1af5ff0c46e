"""Evidence report synthesis, rendering, and link-completeness checking.

The machine (JSON) rendering is the source of truth; the human (markdown)
rendering is a pure projection of it. Timestamps pass through an injectable
override so golden-file comparisons are byte-stable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .claims import Claim
from .errors import ReportLinkError, SchemaViolation, UnknownFormat
from .labeling import ClaimLabel, EvidenceBundle, EvidenceItem, LABELS
from .positioning import PositionSummary

REPORT_SCHEMA_VERSION = 1
REVIEW_SCHEMA_NAME = "review.v1"

DEFAULT_DECISION_TOKENS = ("accept", "reject", "acceptance", "rejection")

_SUBSTANTIVE_RE = re.compile(
    r"\b(support|supported|conflict|contradict|novel|novelty|reproduc|outperform|"
    r"partially|inconclusive)\w*\b", re.IGNORECASE)


@dataclass(frozen=True)
class Judgment:
    text: str
    claim_id: str | None = None
    evidence_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class LabeledClaim:
    claim: Claim
    label: ClaimLabel
    bundle: EvidenceBundle
    subclaim_labels: tuple[tuple[str, ClaimLabel], ...] = ()


@dataclass(frozen=True)
class EpisodeSummary:
    episode_id: str
    outcome: str
    started: float
    ended: float
    tasks: tuple[dict, ...] = ()
    repairs: tuple[dict, ...] = ()
    trace_path: str = ""


@dataclass(frozen=True)
class EvidenceReport:
    manuscript_id: str
    position: PositionSummary | None
    labeled_claims: tuple[LabeledClaim, ...]
    evidence: tuple[EvidenceItem, ...]
    episodes: tuple[EpisodeSummary, ...] = ()
    failures: tuple[dict, ...] = ()
    judgments: tuple[Judgment, ...] = ()
    generated_at: float = 0.0


def _is_substantive(j: Judgment) -> bool:
    return j.claim_id is not None or bool(_SUBSTANTIVE_RE.search(j.text))


def verify_link_completeness(r: EvidenceReport) -> list[str]:
    """Empty list iff zero dangling evidence ids and zero evidence-free
    substantive judgments."""
    known = {e.id for e in r.evidence}
    violations: list[str] = []
    for j in r.judgments:
        for eid in j.evidence_ids:
            if eid not in known:
                violations.append(f"judgment references unknown evidence id {eid!r}")
        if _is_substantive(j) and not j.evidence_ids:
            violations.append(f"substantive judgment without evidence: {j.text[:60]!r}")
    for lc in r.labeled_claims:
        for eid in lc.label.evidence_ids:
            if eid not in known:
                violations.append(
                    f"label for {lc.claim.id} cites unknown evidence id {eid!r}")
        for _, sl in lc.subclaim_labels:
            for eid in sl.evidence_ids:
                if eid not in known:
                    violations.append(
                        f"subclaim label cites unknown evidence id {eid!r}")
    return violations


def synthesize_review(labeled: list[LabeledClaim],
                      position: PositionSummary | None,
                      failures: list[dict],
                      backend, *,
                      evidence: list[EvidenceItem],
                      retry_budget: int = 2,
                      decision_tokens: tuple[str, ...] = DEFAULT_DECISION_TOKENS
                      ) -> list[Judgment]:
    """Backend-written concise review; judgments are schema-validated and any
    accept/reject recommendation is rejected outright.

    Judgments naming a claim inherit that claim's deciding evidence ids when
    the backend does not cite explicit ones.
    """
    if not labeled:
        return [Judgment(text="No review-relevant claims were extracted from "
                              "this manuscript; no judgments are offered.")]
    by_claim = {lc.claim.id: lc for lc in labeled}
    known_ids = {e.id for e in evidence}

    claim_lines = "\n".join(
        f"- {lc.claim.id} [{lc.label.value}]: {lc.claim.statement}" for lc in labeled)
    user = ("Write a concise review as a JSON array of judgments "
            '[{"text", "claim_id", "evidence_ids"}] ordered by decision '
            "relevance. Never recommend acceptance or rejection.\n\n"
            f"Labeled claims:\n{claim_lines}\n\n"
            f"Position: {position.role_statement if position else '(none)'}\n"
            f"Failures: {len(failures)} episode failure(s) recorded.")
    token_re = re.compile(r"\b(" + "|".join(map(re.escape, decision_tokens)) + r")\b",
                          re.IGNORECASE)
    last: list[str] = []
    for _ in range(retry_budget + 1):
        prompt = user
        if last:
            prompt += "\n\nPrevious output violated the schema:\n" + "\n".join(
                f"- {v}" for v in last)
        text = backend.complete(
            system="You write evidence-linked review judgments as JSON.",
            user=prompt, schema=REVIEW_SCHEMA_NAME)
        last = []
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            last = ["response is not valid JSON"]
            continue
        if not isinstance(raw, list) or not raw:
            last = ["response must be a non-empty JSON array"]
            continue
        judgments: list[Judgment] = []
        for item in raw:
            if not isinstance(item, dict) or not str(item.get("text", "")).strip():
                last.append("judgment missing text")
                continue
            jtext = str(item["text"])
            if token_re.search(jtext):
                last.append(f"judgment contains a decision recommendation: {jtext[:60]!r}")
                continue
            claim_id = item.get("claim_id")
            eids = tuple(str(e) for e in item.get("evidence_ids", []))
            if claim_id is not None and claim_id not in by_claim:
                last.append(f"judgment names unknown claim {claim_id!r}")
                continue
            if not eids and claim_id is not None:
                eids = by_claim[claim_id].label.evidence_ids
            bad = [e for e in eids if e not in known_ids]
            if bad:
                last.append(f"judgment cites unknown evidence ids {bad}")
                continue
            j = Judgment(text=jtext, claim_id=claim_id, evidence_ids=eids)
            if _is_substantive(j) and not j.evidence_ids:
                last.append(f"substantive judgment without evidence: {jtext[:60]!r}")
                continue
            judgments.append(j)
        if last:
            continue
        return judgments
    raise SchemaViolation(
        f"review synthesis failed validation after {retry_budget} retries", last)


# --- rendering -----------------------------------------------------------------


def _ts(value: float, override: float | None) -> float:
    return override if override is not None else value


def report_to_dict(r: EvidenceReport, fixed_timestamp: float | None = None) -> dict:
    def claim_dict(c: Claim) -> dict:
        return {"id": c.id, "kind": c.kind, "statement": c.statement,
                "scope": {"tasks": sorted(c.scope.tasks),
                          "datasets": sorted(c.scope.datasets),
                          "metrics": sorted(c.scope.metrics),
                          "conditions": sorted(c.scope.conditions)},
                "locations": list(c.locations),
                "subclaims": [claim_dict(s) for s in c.subclaims]}

    def label_dict(lb: ClaimLabel) -> dict:
        return {"value": lb.value, "justification": lb.justification,
                "evidence_ids": list(lb.evidence_ids)}

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "manuscript_id": r.manuscript_id,
        "generated_at": _ts(r.generated_at, fixed_timestamp),
        "position": None if r.position is None else {
            "role_statement": r.position.role_statement,
            "novelty_mode": r.position.novelty_mode,
            "low_confidence": r.position.low_confidence,
            "design_axes": [{"axis": a.axis,
                             "submission_choice": a.submission_choice,
                             "neighbor_choices": a.neighbor_choices}
                            for a in r.position.design_axes]},
        "claims": [{
            "claim": claim_dict(lc.claim),
            "label": label_dict(lc.label),
            "subclaim_labels": [{"claim_id": cid, "label": label_dict(sl)}
                                for cid, sl in lc.subclaim_labels],
        } for lc in r.labeled_claims],
        "evidence": [{"id": e.id, "kind": e.kind, "ref": e.ref,
                      "summary": e.summary, "stance": e.stance}
                     for e in r.evidence],
        "episodes": [{
            "episode_id": ep.episode_id, "outcome": ep.outcome,
            "started": _ts(ep.started, fixed_timestamp),
            "ended": _ts(ep.ended, fixed_timestamp),
            "tasks": list(ep.tasks), "repairs": list(ep.repairs),
            "trace_path": ep.trace_path,
        } for ep in r.episodes],
        "failures": list(r.failures),
        "judgments": [{"text": j.text, "claim_id": j.claim_id,
                       "evidence_ids": list(j.evidence_ids)}
                      for j in r.judgments],
    }


def render_report(r: EvidenceReport, fmt: str,
                  fixed_timestamp: float | None = None) -> bytes:
    """Deterministic bytes for a valid report; refuses dangling links."""
    violations = verify_link_completeness(r)
    if violations:
        raise ReportLinkError("; ".join(violations))
    if fmt in ("json", "machine"):
        payload = report_to_dict(r, fixed_timestamp)
        return (json.dumps(payload, indent=2, sort_keys=True,
                           ensure_ascii=False) + "\n").encode("utf-8")
    if fmt in ("md", "markdown", "human"):
        return _render_markdown(r).encode("utf-8")
    raise UnknownFormat(fmt)


def _render_markdown(r: EvidenceReport) -> str:
    lines = [f"# Evidence report: {r.manuscript_id}", ""]
    if r.position:
        lines += ["## Technical position", "", r.position.role_statement,
                  f"(novelty mode: {r.position.novelty_mode})", ""]
    lines += ["## Claims", ""]
    for lc in r.labeled_claims:
        lines.append(f"### {lc.claim.id} — {lc.label.value}")
        lines.append("")
        lines.append(lc.claim.statement)
        lines.append("")
        lines.append(f"Justification: {lc.label.justification}")
        if lc.label.evidence_ids:
            lines.append("Evidence: " + ", ".join(lc.label.evidence_ids))
        for cid, sl in lc.subclaim_labels:
            lines.append(f"- {cid}: {sl.value}"
                         + (f" ({', '.join(sl.evidence_ids)})" if sl.evidence_ids else ""))
        lines.append("")
    if r.judgments:
        lines += ["## Review", ""]
        for j in r.judgments:
            suffix = f" [{', '.join(j.evidence_ids)}]" if j.evidence_ids else ""
            lines.append(f"- {j.text}{suffix}")
        lines.append("")
    if r.episodes:
        lines += ["## Verification episodes", ""]
        for ep in r.episodes:
            lines.append(f"- {ep.episode_id}: {ep.outcome} "
                         f"({len(ep.tasks)} task(s), {len(ep.repairs)} repair(s))")
        lines.append("")
    if r.failures:
        lines += ["## Failures", ""]
        for f in r.failures:
            lines.append(f"- {f.get('episode_id', '?')}: {f.get('failure_type')} "
                         f"— {f.get('note', '')}")
        lines.append("")
    if r.evidence:
        lines += ["## Evidence index", ""]
        for e in r.evidence:
            lines.append(f"- {e.id} [{e.kind}] {e.ref}: {e.summary}")
        lines.append("")
    return "\n".join(lines)


def report_from_dict(d: dict) -> dict:
    """Load a stored machine report for re-rendering or verification.

    Returns the raw dict; verify_report_dict checks link completeness on it.
    """
    if d.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise UnknownFormat(f"unsupported report schema: {d.get('schema_version')}")
    return d


def verify_report_dict(d: dict) -> list[str]:
    """Link-completeness check over a stored machine report."""
    known = {e["id"] for e in d.get("evidence", [])}
    violations: list[str] = []
    for j in d.get("judgments", []):
        for eid in j.get("evidence_ids", []):
            if eid not in known:
                violations.append(f"judgment references unknown evidence id {eid!r}")
        j_obj = Judgment(text=j.get("text", ""), claim_id=j.get("claim_id"),
                         evidence_ids=tuple(j.get("evidence_ids", [])))
        if _is_substantive(j_obj) and not j_obj.evidence_ids:
            violations.append(
                f"substantive judgment without evidence: {j_obj.text[:60]!r}")
    for c in d.get("claims", []):
        for eid in c.get("label", {}).get("evidence_ids", []):
            if eid not in known:
                violations.append(
                    f"label for {c.get('claim', {}).get('id')} cites unknown "
                    f"evidence id {eid!r}")
        for sub in c.get("subclaim_labels", []):
            for eid in sub.get("label", {}).get("evidence_ids", []):
                if eid not in known:
                    violations.append(f"subclaim label cites unknown evidence id {eid!r}")
    for lbl in [c.get("label", {}).get("value") for c in d.get("claims", [])]:
        if lbl is not None and lbl not in LABELS:
            violations.append(f"non-canonical label string {lbl!r}")
    return violations
