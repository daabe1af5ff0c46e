"""End-to-end orchestration: parse, extract, position, verify, align, label,
synthesize, render.

Stage degradations follow the per-module contracts; a failed verification
episode never aborts the run. With the mock backend and a fixed timestamp the
machine report is byte-identical across runs.
"""

from __future__ import annotations

import shutil
import time
from decimal import Decimal
from pathlib import Path

from .. import alignment as al
from ..claims import Claim, extract_claims, decompose_claim
from ..docmodel import (Manuscript, MentionVocabulary, extract_result_mentions,
                        parse_document, resolve_location)
from ..errors import (BackendUnavailable, ConfigInvalid, SchemaViolation,
                      SearchUnavailable, UnresolvableScope)
from ..failure import NOT_FAILED, classify_failure
from ..labeling import (AFFIRMS, CONTRADICTS, EvidenceBundle, EvidenceItem,
                        label_claim)
from ..positioning import build_comparison_set, summarize_position
from ..report import (EpisodeSummary, EvidenceReport, LabeledClaim,
                      render_report, synthesize_review)
from ..sandbox import (ArtifactRef, Budget, EpisodeRunner,
                       deterministic_episode_id)
from ..search import FixtureScholarlySearch, HttpScholarlySearch, UnavailableSearch
from .backends import HttpChatBackend, MockReplayBackend
from .config import PipelineConfig


def build_backend(cfg: PipelineConfig, out_dir: Path):
    log_path = out_dir / "reports" / "backend_exchanges.jsonl"
    if cfg.backend.kind == "mock_replay":
        if not cfg.backend.script:
            raise ConfigInvalid("mock_replay backend requires backend.script")
        return MockReplayBackend.from_script_file(cfg.backend.script,
                                                  log_path=log_path)
    return HttpChatBackend(cfg.backend.endpoint or "", model=cfg.backend.model,
                           api_key_env=cfg.backend.api_key_env,
                           log_path=log_path)


def build_search(cfg: PipelineConfig):
    if cfg.search.kind == "fixture" and cfg.search.fixture:
        try:
            return FixtureScholarlySearch(cfg.search.fixture)
        except SearchUnavailable:
            return UnavailableSearch()
    if cfg.search.kind == "http" and cfg.search.endpoint:
        return HttpScholarlySearch(cfg.search.endpoint)
    return UnavailableSearch()


def _decompose_all(claims: list[Claim], mentions) -> list[Claim]:
    out = []
    for c in claims:
        multi = any(len(dim) > 1 for dim in
                    (c.scope.tasks, c.scope.datasets, c.scope.metrics))
        if c.kind in ("empirical", "reproducibility") and multi:
            try:
                c = decompose_claim(c, mentions)
            except UnresolvableScope:
                pass  # keep undecomposed; alignment will leave it unaligned
        out.append(c)
    return out


def _excerpt(m: Manuscript, loc: str, limit: int = 160) -> str:
    try:
        text = resolve_location(m, loc)
    except Exception:
        return loc
    return text if len(text) <= limit else text[:limit] + "..."


class _EvidenceIndex:
    def __init__(self):
        self.items: list[EvidenceItem] = []
        self._by_key: dict[tuple, EvidenceItem] = {}

    def add(self, kind: str, ref: str, summary: str, stance: str,
            reliable: bool = True) -> EvidenceItem:
        key = (kind, ref, stance)
        if key in self._by_key:
            return self._by_key[key]
        item = EvidenceItem(id=f"ev-{len(self.items) + 1:04d}", kind=kind,
                            ref=ref, summary=summary, stance=stance,
                            reliable=reliable)
        self.items.append(item)
        self._by_key[key] = item
        return item


def _leaf_bundle(leaf: Claim, m: Manuscript, index: _EvidenceIndex,
                 results_by_claim: dict[str, al.AlignmentResult],
                 unreliable_tasks: set[str]) -> EvidenceBundle:
    items: list[EvidenceItem] = []
    for loc in leaf.locations:
        items.append(index.add("manuscript", loc, _excerpt(m, loc), AFFIRMS))
    res = results_by_claim.get(leaf.id)
    if res is not None and res.verdict != "unaligned" and res.observed is not None:
        obs = res.observed
        reliable = obs.task_id not in unreliable_tasks
        if res.verdict == "match":
            stance, summary = AFFIRMS, (
                f"reproduced {obs.metric_name} {obs.value} matches reported "
                f"{res.paper_value} within tolerance")
        elif res.verdict == "comparative_fail":
            stance, summary = CONTRADICTS, (
                f"reproduced {obs.metric_name} {obs.value} does not beat the "
                f"strongest baseline {res.comparator_name} at {res.comparator_value}")
        else:
            stance, summary = CONTRADICTS, (
                f"reproduced {obs.metric_name} {obs.value} diverges from "
                f"reported {res.paper_value}")
        items.append(index.add("execution", f"{obs.source}#L{obs.line}",
                               summary, stance, reliable=reliable))
    elif res is not None and res.verdict == "unaligned" and res.observed is None:
        pass  # absence of evidence stays absent: Inconclusive-compatible
    return EvidenceBundle(claim_id=leaf.id, items=tuple(items))


def run_pipeline(manuscript_path: str | Path, artifact_source: str | None,
                 cfg: PipelineConfig, out_dir: str | Path, *,
                 clock=time.time,
                 fixed_timestamp: float | None = None) -> EvidenceReport:
    out = Path(out_dir)
    for sub in ("manuscript", "reports", "traces", "evidence"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    source_text = Path(manuscript_path).read_text()
    shutil.copyfile(manuscript_path, out / "manuscript" / Path(manuscript_path).name)
    m = parse_document(source_text)

    vocab = MentionVocabulary(metrics=tuple(cfg.metrics), tasks=tuple(cfg.tasks),
                              datasets=tuple(cfg.datasets))
    mentions = extract_result_mentions(m, vocab)

    backend = build_backend(cfg, out)
    search = build_search(cfg)

    claims = extract_claims(m, backend, max_claims=cfg.max_claims,
                            retry_budget=cfg.retry_budget)
    claims = _decompose_all(claims, mentions)

    position = None
    try:
        cs = build_comparison_set(m, search, cap=cfg.neighbor_cap, clock=clock)
        position = summarize_position(m, cs, backend,
                                      retry_budget=cfg.retry_budget)
    except (BackendUnavailable, SchemaViolation):
        position = None

    # --- execution-based verification (optional) -----------------------------
    episode = None
    failure_record = None
    results: list[al.AlignmentResult] = []
    unreliable_tasks: set[str] = set()
    tol = al.Tolerance(relative=Decimal(str(cfg.tolerance_relative)),
                       absolute=None if cfg.tolerance_absolute is None
                       else Decimal(str(cfg.tolerance_absolute)))

    if artifact_source:
        episode_id = deterministic_episode_id(m.id, artifact_source)
        backend.current_episode_id = episode_id
        runner = EpisodeRunner(
            out, episode_id,
            budget=Budget(wall_clock_limit=cfg.budget_wall_clock_seconds,
                          max_output_bytes=cfg.budget_max_output_bytes,
                          max_repair_attempts=cfg.budget_max_repair_attempts),
            protected_globs=tuple(cfg.protected_globs),
            grace=cfg.grace_seconds,
            network_allowed=cfg.network_allowed,
            argument_defaults=dict(cfg.repair_argument_defaults),
            output_patterns=tuple(cfg.output_patterns),
            env_provider=cfg.env_provider,
            clock=clock)
        runner.run(ArtifactRef(source=str(artifact_source)), claims)

        observations = al.parse_metrics(
            runner.store, episode_id=episode_id,
            task_vocab=tuple(cfg.tasks), dataset_vocab=tuple(cfg.datasets))
        results = al.align(claims, observations, mentions, tol,
                           method=m.method, plan=runner.plan,
                           directions=dict(cfg.metric_directions),
                           comparative_markers=tuple(
                               n.lower() for n in cfg.comparative_markers))
        unreliable_tasks = {rec["payload"]["task_id"]
                            for rec in runner.trace.events
                            if rec["type"] == "task_end"
                            and rec["payload"].get("timed_out")}
        aligned = [r for r in results if r.verdict != "unaligned"]
        outcome = "evidence_produced" if aligned else "failed"
        episode = runner.finalize(outcome, aligned_count=len(aligned))
        fr = classify_failure(runner.trace.events)
        if fr != NOT_FAILED:
            failure_record = fr
        backend.current_episode_id = None

    # --- bundles and labels -----------------------------------------------------
    index = _EvidenceIndex()
    results_by_claim = {r.claim_id: r for r in results}
    labeled: list[LabeledClaim] = []
    for c in claims:
        if c.subclaims:
            sub_bundles = tuple(
                (s.id, _leaf_bundle(s, m, index, results_by_claim, unreliable_tasks))
                for s in c.subclaims)
            bundle = EvidenceBundle(claim_id=c.id, subclaim_bundles=sub_bundles)
            label = label_claim(c, bundle)
            sub_labels = tuple((s.id, label_claim(s, dict(sub_bundles)[s.id]))
                               for s in c.subclaims)
        else:
            bundle = _leaf_bundle(c, m, index, results_by_claim, unreliable_tasks)
            label = label_claim(c, bundle)
            sub_labels = ()
        labeled.append(LabeledClaim(claim=c, label=label, bundle=bundle,
                                    subclaim_labels=sub_labels))

    failures: list[dict] = []
    if failure_record is not None:
        failures.append({"episode_id": failure_record.episode_id,
                         "failure_type": failure_record.failure_type,
                         "blocking_event": failure_record.blocking_event,
                         "note": failure_record.note})

    judgments = synthesize_review(
        labeled, position, failures, backend, evidence=index.items,
        retry_budget=cfg.retry_budget,
        decision_tokens=tuple(cfg.decision_tokens))

    episodes: tuple[EpisodeSummary, ...] = ()
    if episode is not None:
        start_ts = runner.trace.events[0]["ts"]
        end_ts = runner.trace.events[-1]["ts"]
        episodes = (EpisodeSummary(
            episode_id=episode.episode_id, outcome=episode.outcome,
            started=start_ts, ended=end_ts,
            tasks=tuple({"task_id": rec.task_id, "command": list(rec.command),
                         "return_code": rec.return_code,
                         "timed_out": rec.timed_out,
                         "archived_paths": list(rec.archived_paths)}
                        for rec in episode.records),
            repairs=tuple(r.to_dict() for r in episode.repairs),
            trace_path=str(Path("traces") / f"{episode.episode_id}.jsonl")),)

    report = EvidenceReport(
        manuscript_id=m.id, position=position,
        labeled_claims=tuple(labeled), evidence=tuple(index.items),
        episodes=episodes, failures=tuple(failures),
        judgments=tuple(judgments), generated_at=clock())

    (out / "reports" / "report.json").write_bytes(
        render_report(report, "json", fixed_timestamp))
    (out / "reports" / "report.md").write_bytes(
        render_report(report, "markdown", fixed_timestamp))
    return report
