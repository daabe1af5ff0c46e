"""Five-label calculus over evidence bundles.

Canonical label strings (exactly as rendered in reports):
Supported / Supported by the paper / Partially supported / In conflict /
Inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BundleMismatch, EmptyInput

SUPPORTED = "Supported"
SUPPORTED_BY_PAPER = "Supported by the paper"
PARTIALLY_SUPPORTED = "Partially supported"
IN_CONFLICT = "In conflict"
INCONCLUSIVE = "Inconclusive"

LABELS = (SUPPORTED, SUPPORTED_BY_PAPER, PARTIALLY_SUPPORTED, IN_CONFLICT,
          INCONCLUSIVE)

EVIDENCE_KINDS = ("manuscript", "literature", "execution")
EXTERNAL_KINDS = ("literature", "execution")

# How an item bears on its claim. Execution items derive stance from the
# alignment verdict; literature items from the backend's explicit flag;
# manuscript items always affirm (they are the paper's own argument).
AFFIRMS = "affirms"
CONTRADICTS = "contradicts"
NEUTRAL = "neutral"


@dataclass(frozen=True)
class EvidenceItem:
    id: str
    kind: str
    ref: str
    summary: str
    stance: str = NEUTRAL
    reliable: bool = True


@dataclass(frozen=True)
class EvidenceBundle:
    claim_id: str
    items: tuple[EvidenceItem, ...] = ()
    subclaim_bundles: tuple[tuple[str, "EvidenceBundle"], ...] = ()


@dataclass(frozen=True)
class ClaimLabel:
    value: str
    justification: str
    evidence_ids: tuple[str, ...] = ()


def label_subclaim(bundle: EvidenceBundle) -> ClaimLabel:
    """Label a leaf bundle.

    Supported: an external item affirms and no reliable external item
    contradicts. In conflict: a reliable external item contradicts.
    Supported by the paper: only manuscript items affirm. Inconclusive:
    no items, or nothing affirming or contradicting.
    """
    if bundle.subclaim_bundles:
        raise BundleMismatch("label_subclaim requires a leaf bundle")
    items = bundle.items
    contradicting = [i for i in items
                     if i.kind in EXTERNAL_KINDS and i.stance == CONTRADICTS
                     and i.reliable]
    external_affirming = [i for i in items
                          if i.kind in EXTERNAL_KINDS and i.stance == AFFIRMS]
    manuscript_affirming = [i for i in items
                            if i.kind == "manuscript" and i.stance == AFFIRMS]
    if contradicting:
        ids = tuple(i.id for i in contradicting)
        return ClaimLabel(IN_CONFLICT,
                          f"contradicted by external evidence {', '.join(ids)}", ids)
    if external_affirming:
        ids = tuple(i.id for i in external_affirming)
        return ClaimLabel(SUPPORTED,
                          f"affirmed by external evidence {', '.join(ids)}", ids)
    if manuscript_affirming:
        ids = tuple(i.id for i in manuscript_affirming)
        return ClaimLabel(SUPPORTED_BY_PAPER,
                          f"internal argument only: {', '.join(ids)}", ids)
    return ClaimLabel(INCONCLUSIVE, "available evidence is insufficient", ())


def aggregate_labels(values: list[str]) -> str:
    """Fold subclaim label values into a parent value.

    Order-invariant (a function of the multiset). Conflicts never vanish:
    adding In conflict to any input never yields Supported.
    """
    if not values:
        raise EmptyInput("no subclaim labels to aggregate")
    unknown = [v for v in values if v not in LABELS]
    if unknown:
        raise ValueError(f"unknown label values: {unknown}")
    counts = {v: values.count(v) for v in LABELS}
    n = len(values)
    if counts[SUPPORTED] == n:
        return SUPPORTED
    if counts[IN_CONFLICT] == n:
        return IN_CONFLICT
    if counts[SUPPORTED] > 0 or counts[PARTIALLY_SUPPORTED] > 0:
        return PARTIALLY_SUPPORTED
    if counts[IN_CONFLICT] > 0:
        return IN_CONFLICT
    if counts[INCONCLUSIVE] == n:
        return INCONCLUSIVE
    # Remaining: Supported by the paper, possibly mixed with Inconclusive.
    return SUPPORTED_BY_PAPER


def label_claim(claim, bundle: EvidenceBundle) -> ClaimLabel:
    """Leaf claims via label_subclaim; decomposed claims via aggregation over
    recursively labeled subclaims."""
    if bundle.claim_id != claim.id:
        raise BundleMismatch(
            f"bundle {bundle.claim_id} does not match claim {claim.id}")
    if not claim.subclaims:
        if bundle.subclaim_bundles:
            raise BundleMismatch(f"leaf claim {claim.id} got subclaim bundles")
        return label_subclaim(bundle)

    sub_bundles = dict(bundle.subclaim_bundles)
    if set(sub_bundles) != {s.id for s in claim.subclaims}:
        raise BundleMismatch(
            f"subclaim bundles do not match decomposition of {claim.id}")
    sub_labels = [label_claim(s, sub_bundles[s.id]) for s in claim.subclaims]
    value = aggregate_labels([sl.value for sl in sub_labels])
    deciding: list[str] = []
    for sl in sub_labels:
        if sl.value in (IN_CONFLICT, SUPPORTED) or sl.value == value:
            deciding.extend(sl.evidence_ids)
    return ClaimLabel(
        value=value,
        justification="aggregated from subclaims: " + ", ".join(
            f"{s.id}={sl.value}" for s, sl in zip(claim.subclaims, sub_labels)),
        evidence_ids=tuple(dict.fromkeys(deciding)))
