"""Align metric observations from execution outputs with paper numbers.

Pure, stateless transformations: parse_metrics scans archived logs with the
configured rule set, compare_numbers applies the relative/absolute tolerance,
and align produces one verdict per alignable subclaim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .claims import Claim
from .docmodel import ResultMention, normalize_token
from .sandbox.executor import EvidenceStore
from .sandbox.types import Task

HIGHER_IS_BETTER = "higher_is_better"
LOWER_IS_BETTER = "lower_is_better"

DEFAULT_METRIC_DIRECTIONS = {
    "mrr": HIGHER_IS_BETTER,
    "accuracy": HIGHER_IS_BETTER,
    "f1": HIGHER_IS_BETTER,
    "auc": HIGHER_IS_BETTER,
    "loss": LOWER_IS_BETTER,
}


def metric_direction(metric_name: str,
                     directions: dict[str, str] | None = None) -> str:
    directions = directions or DEFAULT_METRIC_DIRECTIONS
    key = normalize_token(metric_name)
    if key.startswith("hits@") or key.startswith("hits "):
        return HIGHER_IS_BETTER
    return directions.get(key, HIGHER_IS_BETTER)


@dataclass(frozen=True)
class Tolerance:
    relative: Decimal = Decimal("0.02")
    absolute: Decimal | None = Decimal("0.005")


@dataclass(frozen=True)
class MetricRule:
    """One named extraction pattern; the regex must expose a ``value`` group
    and may expose ``metric``, ``dataset``, and ``task`` groups."""

    name: str
    pattern: str
    metric: str | None = None


DEFAULT_METRIC_RULES = (
    MetricRule(
        name="labelled-metric",
        pattern=(r"\b(?P<metric>MRR|Hits@\d+|Accuracy|F1|AUC|Loss)\b"
                 r"\s*[:=]\s*(?P<value>[-+]?\d+(?:\.\d+)?)(?P<pct>%?)")),
    MetricRule(name="task-tag", pattern=r"\btask[=:]\s*(?P<task>[\w./-]+)"),
    MetricRule(name="dataset-tag", pattern=r"\bdataset[=:]\s*(?P<dataset>[\w./-]+)"),
)


@dataclass(frozen=True)
class MetricObservation:
    metric_name: str
    value: Decimal
    raw: str
    source: str           # archived path
    line: int             # zero-based line index in the archived file
    episode_id: str
    dataset: str | None = None
    task: str | None = None
    task_id: str | None = None
    unit: str | None = None


@dataclass(frozen=True)
class AlignmentResult:
    claim_id: str
    verdict: str          # match | mismatch | comparative_fail | unaligned
    paper_value: Decimal | None = None
    paper_location: str | None = None
    observed: MetricObservation | None = None
    comparator_name: str | None = None
    comparator_value: Decimal | None = None


def parse_metrics(store: EvidenceStore, *, episode_id: str,
                  rules: tuple[MetricRule, ...] = DEFAULT_METRIC_RULES,
                  task_vocab: tuple[str, ...] = (),
                  dataset_vocab: tuple[str, ...] = ()) -> list[MetricObservation]:
    """Scan every archived file of an episode; each line matching a value rule
    yields one observation with its exact source offset."""
    value_rules = [r for r in rules if "(?P<value>" in r.pattern]
    tag_rules = [r for r in rules if "(?P<value>" not in r.pattern]
    observations: list[MetricObservation] = []
    seen_paths: set[tuple[str, str]] = set()
    for entry in store.manifest():
        if entry["episode_id"] != episode_id:
            continue
        key = (entry["object_path"], entry["task_id"])
        if key in seen_paths:
            continue
        seen_paths.add(key)
        try:
            text = store.read(entry["object_path"]).decode(errors="replace")
        except OSError:
            continue
        for lineno, line in enumerate(text.splitlines()):
            for rule in value_rules:
                for hit in re.finditer(rule.pattern, line, re.IGNORECASE):
                    groups = hit.groupdict()
                    try:
                        value = Decimal(groups["value"])
                    except InvalidOperation:
                        continue
                    metric = groups.get("metric") or rule.metric
                    if not metric:
                        continue
                    task, dataset = _line_context(line, tag_rules,
                                                  task_vocab, dataset_vocab)
                    observations.append(MetricObservation(
                        metric_name=metric, value=value, raw=groups["value"],
                        source=entry["object_path"], line=lineno,
                        episode_id=episode_id, dataset=dataset, task=task,
                        task_id=entry["task_id"],
                        unit="percent" if groups.get("pct") else None))
    return observations


def _line_context(line: str, tag_rules, task_vocab, dataset_vocab):
    task = dataset = None
    for rule in tag_rules:
        hit = re.search(rule.pattern, line, re.IGNORECASE)
        if hit:
            groups = hit.groupdict()
            task = groups.get("task") or task
            dataset = groups.get("dataset") or dataset
    norm_line = normalize_token(line)
    if task is None:
        for name in task_vocab:
            if normalize_token(name) in norm_line:
                task = name
                break
    if dataset is None:
        for name in dataset_vocab:
            if normalize_token(name) in norm_line:
                dataset = name
                break
    return task, dataset


def compare_numbers(paper_value, observed, tol: Tolerance,
                    direction: str = HIGHER_IS_BETTER) -> str:
    """Symmetric tolerance check: match iff the relative gap (against the
    larger magnitude) is within tol.relative, or the absolute gap is within
    the floor when one applies."""
    a = Decimal(str(paper_value))
    b = Decimal(str(observed))
    diff = abs(a - b)
    if tol.absolute is not None and diff <= tol.absolute:
        return "match"
    denom = max(abs(a), abs(b))
    if denom == 0:
        return "match" if diff == 0 else "mismatch"
    return "match" if diff / denom <= tol.relative else "mismatch"


def _norm_or_none(value: str | None) -> str | None:
    return normalize_token(value) if value else None


def _scope_value(values: frozenset[str]) -> str | None:
    return next(iter(values)) if len(values) == 1 else None


def _observation_matches(sub: Claim, obs: MetricObservation) -> bool:
    metric = _norm_or_none(obs.metric_name)
    if sub.scope.metrics and metric not in sub.scope.metrics:
        return False
    task = _norm_or_none(obs.task)
    if sub.scope.tasks and task is not None and task not in sub.scope.tasks:
        return False
    dataset = _norm_or_none(obs.dataset)
    if sub.scope.datasets and dataset is not None and dataset not in sub.scope.datasets:
        return False
    return True


def _is_comparative(statement: str, markers: tuple[str, ...]) -> bool:
    norm = normalize_token(statement)
    return any(m in norm for m in markers)


DEFAULT_COMPARATIVE_MARKERS = (
    "outperform", "better than", "state of the art", "beats", "surpass",
    "improves over", "superior to",
)


def _paper_mention(sub: Claim, mentions: tuple[ResultMention, ...],
                   method: str | None) -> ResultMention | None:
    """Pick the paper-reported value for a subclaim: first a mention at one of
    the claim's own cell locations, else the method-row mention matching the
    subclaim triple (exact method name preferred)."""
    by_location = {mn.location: mn for mn in mentions}
    for loc in sub.locations:
        if loc in by_location:
            return by_location[loc]
    candidates = [mn for mn in mentions if _mention_matches_scope(sub, mn)]
    if method:
        method_norm = normalize_token(method)
        exact = [mn for mn in candidates
                 if mn.subject and normalize_token(mn.subject) == method_norm]
        if exact:
            return exact[0]
        prefixed = [mn for mn in candidates
                    if mn.subject and normalize_token(mn.subject).startswith(method_norm)]
        if prefixed:
            return prefixed[0]
    return candidates[0] if candidates else None


def _mention_matches_scope(sub: Claim, mn: ResultMention) -> bool:
    if sub.scope.metrics and normalize_token(mn.metric_name) not in sub.scope.metrics:
        return False
    if sub.scope.tasks and (not mn.task or normalize_token(mn.task) not in sub.scope.tasks):
        return False
    if sub.scope.datasets and (not mn.dataset
                               or normalize_token(mn.dataset) not in sub.scope.datasets):
        return False
    return True


def _strongest_baseline(paper_mention: ResultMention,
                        mentions: tuple[ResultMention, ...],
                        method: str | None,
                        direction: str) -> ResultMention | None:
    """Best non-method row in the same table and metric as the paper value."""
    if not paper_mention.location.startswith("cell:"):
        return None
    table_id = paper_mention.location.split(":")[1]
    method_norm = normalize_token(method) if method else None
    rows = [mn for mn in mentions
            if mn.location.startswith(f"cell:{table_id}:")
            and normalize_token(mn.metric_name) == normalize_token(paper_mention.metric_name)
            and mn.subject
            and (method_norm is None
                 or not normalize_token(mn.subject).startswith(method_norm))]
    if not rows:
        return None
    best = max if direction == HIGHER_IS_BETTER else min
    return best(rows, key=lambda mn: mn.value)


def _beats(observed: Decimal, baseline: Decimal, direction: str) -> bool:
    return observed > baseline if direction == HIGHER_IS_BETTER else observed < baseline


def align(claims: list[Claim], observations: list[MetricObservation],
          mentions: tuple[ResultMention, ...], tol: Tolerance, *,
          method: str | None = None,
          plan: list[Task] | None = None,
          directions: dict[str, str] | None = None,
          comparative_markers: tuple[str, ...] = DEFAULT_COMPARATIVE_MARKERS
          ) -> list[AlignmentResult]:
    """One verdict per alignable leaf claim.

    Candidate observations must match the subclaim triple; when the task plan
    is supplied, observations produced by a task targeting the subclaim are
    preferred (earliest task wins ties). No observation means unaligned.
    """
    targeting: dict[str, list[str]] = {}
    if plan:
        for t in plan:
            for cid in t.claim_targets:
                targeting.setdefault(cid, []).append(t.id)

    results: list[AlignmentResult] = []
    for claim in claims:
        leaves = claim.subclaims if claim.subclaims else (claim,)
        for sub in leaves:
            if not (sub.scope.metrics or sub.scope.tasks or sub.scope.datasets):
                continue
            candidates = [o for o in observations if _observation_matches(sub, o)]
            if targeting.get(sub.id):
                preferred = [o for o in candidates
                             if o.task_id in targeting[sub.id]]
                if preferred:
                    order = {tid: i for i, tid in enumerate(targeting[sub.id])}
                    preferred.sort(key=lambda o: (order.get(o.task_id, 99), o.line))
                    candidates = preferred
            if not candidates:
                results.append(AlignmentResult(claim_id=sub.id, verdict="unaligned"))
                continue
            obs = candidates[0]
            paper = _paper_mention(sub, mentions, method)
            direction = metric_direction(obs.metric_name, directions)
            obs_value = _unit_adjusted(obs.value, paper)

            if _is_comparative(sub.statement, comparative_markers) and paper is not None:
                baseline = _strongest_baseline(paper, mentions, method, direction)
                if baseline is not None and not _beats(obs_value, baseline.value, direction):
                    results.append(AlignmentResult(
                        claim_id=sub.id, verdict="comparative_fail",
                        paper_value=paper.value, paper_location=paper.location,
                        observed=obs, comparator_name=baseline.subject,
                        comparator_value=baseline.value))
                    continue
            if paper is None:
                results.append(AlignmentResult(claim_id=sub.id, verdict="unaligned",
                                               observed=obs))
                continue
            verdict = compare_numbers(paper.value, obs_value, tol, direction)
            results.append(AlignmentResult(
                claim_id=sub.id, verdict=verdict, paper_value=paper.value,
                paper_location=paper.location, observed=obs))
    return results


def _unit_adjusted(observed: Decimal, paper: ResultMention | None) -> Decimal:
    # Percent-vs-fraction normalization: paper reports 85.3 (percent), the run
    # printed 0.853.
    if paper is not None and paper.unit == "percent" and paper.value > 1 and observed <= 1:
        return observed * 100
    return observed
