"""Claim extraction, schema validation, and scope decomposition."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources

import jsonschema

from .docmodel import DanglingLocation, Manuscript, ResultMention, normalize_token, resolve_location
from .errors import NoClaimsFound, SchemaViolation, UnresolvableScope

CLAIM_KINDS = ("empirical", "methodological", "theoretical", "reproducibility")
TARGET_KINDS = ("execution", "literature", "manuscript")

CLAIMS_SCHEMA_NAME = "claims.v1"


@dataclass(frozen=True)
class ClaimScope:
    """Normalized (task, dataset, metric, condition) scope sets.

    The all-sets-empty value is the distinguished universal scope.
    """

    tasks: frozenset[str] = frozenset()
    datasets: frozenset[str] = frozenset()
    metrics: frozenset[str] = frozenset()
    conditions: frozenset[str] = frozenset()

    @classmethod
    def of(cls, tasks=(), datasets=(), metrics=(), conditions=()) -> "ClaimScope":
        norm = lambda vals: frozenset(normalize_token(v) for v in vals if v.strip())
        return cls(norm(tasks), norm(datasets), norm(metrics), norm(conditions))

    @property
    def is_universal(self) -> bool:
        return not (self.tasks or self.datasets or self.metrics or self.conditions)

    @property
    def is_singleton(self) -> bool:
        return (len(self.tasks) <= 1 and len(self.datasets) <= 1
                and len(self.metrics) <= 1)


@dataclass(frozen=True)
class EvidenceTarget:
    target_kind: str
    descriptor: str


@dataclass(frozen=True)
class Claim:
    id: str
    kind: str
    statement: str
    scope: ClaimScope
    locations: tuple[str, ...]
    evidence_targets: tuple[EvidenceTarget, ...] = ()
    subclaims: tuple["Claim", ...] = ()


def _load_schema() -> dict:
    text = resources.files("claimcheck.schemas").joinpath("claim.schema.json").read_text()
    return json.loads(text)


_SCHEMA_CACHE: dict | None = None


def claim_json_schema() -> dict:
    global _SCHEMA_CACHE
    if _SCHEMA_CACHE is None:
        _SCHEMA_CACHE = _load_schema()
    return _SCHEMA_CACHE


def validate_claim_schema(raw: object, m: Manuscript) -> Claim | list[str]:
    """Return a Claim iff all invariants hold, else the list of violations."""
    violations: list[str] = []
    validator = jsonschema.Draft202012Validator(claim_json_schema())
    for err in sorted(validator.iter_errors(raw), key=str):
        violations.append(f"schema: {err.message}")
    if violations:
        return violations

    assert isinstance(raw, dict)
    if raw["kind"] not in CLAIM_KINDS:
        violations.append(f"kind outside closed set: {raw['kind']!r}")
    for loc in raw.get("locations", []):
        try:
            resolve_location(m, loc)
        except DanglingLocation:
            violations.append(f"location unresolved: {loc}")
    if not raw.get("locations"):
        violations.append("claim carries no location")
    for t in raw.get("evidence_targets", []):
        if t["target_kind"] not in TARGET_KINDS:
            violations.append(f"evidence target kind outside closed set: {t['target_kind']!r}")
        if not t["descriptor"].strip():
            violations.append("evidence target descriptor empty")
    if violations:
        return violations

    scope_raw = raw.get("scope", {})
    return Claim(
        id=str(raw["id"]),
        kind=raw["kind"],
        statement=raw["statement"],
        scope=ClaimScope.of(
            tasks=scope_raw.get("tasks", []),
            datasets=scope_raw.get("datasets", []),
            metrics=scope_raw.get("metrics", []),
            conditions=scope_raw.get("conditions", []),
        ),
        locations=tuple(raw["locations"]),
        evidence_targets=tuple(
            EvidenceTarget(t["target_kind"], t["descriptor"])
            for t in raw.get("evidence_targets", [])),
    )


def _manuscript_digest(m: Manuscript, max_claims: int) -> str:
    from .docmodel import serialize_document
    return (f"Extract the major review-relevant claims (at most {max_claims}) "
            f"from the following manuscript.\n\n" + serialize_document(m))


def extract_claims(m: Manuscript, backend, *, max_claims: int = 10,
                   retry_budget: int = 2) -> list[Claim]:
    """Schema-constrained claim extraction through the analysis backend.

    Backend output failing validation is retried with the violation list fed
    back, up to ``retry_budget`` retries.
    """
    user = _manuscript_digest(m, max_claims)
    last_violations: list[str] = []
    for attempt in range(retry_budget + 1):
        prompt = user
        if last_violations:
            prompt += "\n\nPrevious output violated the schema:\n" + "\n".join(
                f"- {v}" for v in last_violations)
        text = backend.complete(
            system="You extract typed, located, decomposable claims as JSON.",
            user=prompt, schema=CLAIMS_SCHEMA_NAME)
        try:
            payload = json.loads(text)
        except json.JSONDecodeError:
            last_violations = ["response is not valid JSON"]
            continue
        if not isinstance(payload, list):
            last_violations = ["response must be a JSON array of claims"]
            continue
        claims: list[Claim] = []
        last_violations = []
        for raw in payload:
            result = validate_claim_schema(raw, m)
            if isinstance(result, list):
                last_violations.extend(result)
            else:
                claims.append(result)
        if last_violations:
            continue
        ids = [c.id for c in claims]
        if len(set(ids)) != len(ids):
            last_violations = ["duplicate claim ids"]
            continue
        if not claims:
            raise NoClaimsFound("backend returned an empty claim list")
        return claims[:max_claims]
    raise SchemaViolation(
        f"claim extraction failed schema validation after {retry_budget} retries",
        last_violations)


# --- decomposition -----------------------------------------------------------


def _mention_combos(mentions: tuple[ResultMention, ...]) -> set[tuple[str | None, str | None, str]]:
    combos = set()
    for mn in mentions:
        combos.add((
            normalize_token(mn.task) if mn.task else None,
            normalize_token(mn.dataset) if mn.dataset else None,
            normalize_token(mn.metric_name),
        ))
    return combos


def decompose_claim(c: Claim, mentions: tuple[ResultMention, ...]) -> Claim:
    """Split a broad claim into per-(task, dataset, metric) subclaims.

    Only dimensions with more than one scope value are split; combinations
    are restricted to those present among the manuscript's result mentions.
    A singleton-scope claim is a fixed point. Idempotent.
    """
    if c.subclaims:
        return c

    combos = _mention_combos(mentions)
    mentioned_tasks = {t for t, _, _ in combos if t}
    mentioned_datasets = {d for _, d, _ in combos if d}
    mentioned_metrics = {mt for _, _, mt in combos}

    for dim, present in ((c.scope.tasks, mentioned_tasks),
                         (c.scope.datasets, mentioned_datasets),
                         (c.scope.metrics, mentioned_metrics)):
        missing = dim - present
        if missing:
            raise UnresolvableScope(
                f"scope names not found in manuscript results: {sorted(missing)}")

    if c.scope.is_universal:
        split_tasks = sorted(mentioned_tasks)
        split_datasets: list[str] | None = None
        split_metrics: list[str] | None = None
    else:
        split_tasks = sorted(c.scope.tasks) if len(c.scope.tasks) > 1 else None
        split_datasets = sorted(c.scope.datasets) if len(c.scope.datasets) > 1 else None
        split_metrics = sorted(c.scope.metrics) if len(c.scope.metrics) > 1 else None
        if split_tasks is None and split_datasets is None and split_metrics is None:
            return replace(c, subclaims=())

    if not split_tasks and split_datasets is None and split_metrics is None:
        return replace(c, subclaims=())

    def combo_present(task, dataset, metric) -> bool:
        for t, d, mt in combos:
            if task is not None and t is not None and t != task:
                continue
            if dataset is not None and d is not None and d != dataset:
                continue
            if metric is not None and mt != metric:
                continue
            return True
        return False

    task_axis = split_tasks if split_tasks else [None]
    ds_axis = split_datasets if split_datasets else [None]
    mt_axis = split_metrics if split_metrics else [None]

    subs: list[Claim] = []
    n = 0
    for t in task_axis:
        for d in ds_axis:
            for mt in mt_axis:
                if not combo_present(t, d, mt):
                    continue
                n += 1
                sub_scope = ClaimScope(
                    tasks=frozenset([t]) if t else c.scope.tasks if split_tasks is None else frozenset(),
                    datasets=frozenset([d]) if d else c.scope.datasets if split_datasets is None else frozenset(),
                    metrics=frozenset([mt]) if mt else c.scope.metrics if split_metrics is None else frozenset(),
                    conditions=c.scope.conditions,
                )
                subs.append(Claim(
                    id=f"{c.id}.{n}", kind=c.kind, statement=c.statement,
                    scope=sub_scope, locations=c.locations,
                    evidence_targets=c.evidence_targets))
    # Per-dimension union must equal the parent scope; a split value that
    # survived the presence check above always appears in >=1 combo.
    if len(subs) <= 1:
        return replace(c, subclaims=())
    return replace(c, subclaims=tuple(subs))
