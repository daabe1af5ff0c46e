from decimal import Decimal

import pytest

from claimcheck.docmodel import (MentionVocabulary, extract_result_mentions,
                                 normalize_token, parse_document,
                                 resolve_location, serialize_document)
from claimcheck.errors import DanglingLocation, EmptyDocument, MalformedSource

from conftest import DATASET_VOCAB, TASK_VOCAB


def test_normalize_token():
    assert normalize_token("FB15k-237") == "fb15k 237"
    assert normalize_token("  Link_Prediction  Results ") == "link prediction results"


def test_parse_structure(manuscript):
    m = manuscript
    assert m.id == "compgcn-2019"
    assert m.method == "CompGCN"
    assert [s.id for s in m.sections] == ["intro", "method", "theory", "experiments"]
    assert {t.id for t in m.tables} == {"tbl-lp", "tbl-nc", "tbl-gc", "tbl-basis"}
    assert m.table("tbl-lp").cells[0] == ("Model", "MRR")
    assert m.table("tbl-lp").cells[4] == ("CompGCN", "0.355")
    assert len(m.biblio) == 5
    assert m.section("intro").spans[0].id == "intro.s1"


def test_round_trip(manuscript):
    assert parse_document(serialize_document(manuscript)) == manuscript


def test_empty_and_malformed():
    with pytest.raises(EmptyDocument):
        parse_document("   \n  ")
    with pytest.raises(MalformedSource):
        parse_document("no front matter\n")
    with pytest.raises(MalformedSource):
        parse_document("---\nid: x\ntitle: y\n---\ntext before any heading\n")
    with pytest.raises(MalformedSource):
        # depth jump 1 -> 3
        parse_document("---\nid: x\ntitle: y\n---\n# A\n\n### B\n")
    with pytest.raises(MalformedSource):
        parse_document("---\nid: x\n---\n# A\n")  # no title
    with pytest.raises(EmptyDocument):
        parse_document("---\nid: x\ntitle: y\n---\n")


def test_duplicate_ids_rejected():
    src = "---\nid: x\ntitle: y\n---\n# A {#same}\n\n# B {#same}\n"
    with pytest.raises(MalformedSource):
        parse_document(src)


def test_resolve_location(manuscript):
    assert "CompGCN outperforms" in resolve_location(manuscript, "span:intro.s1")
    assert resolve_location(manuscript, "cell:tbl-basis:1:1") == "0.350"
    for bad in ("span:nope.s9", "cell:tbl-lp:99:0", "cell:tbl-lp:1", "figure:f1"):
        with pytest.raises(DanglingLocation):
            resolve_location(manuscript, bad)


def test_result_mentions(manuscript):
    vocab = MentionVocabulary(tasks=tuple(TASK_VOCAB), datasets=tuple(DATASET_VOCAB))
    mentions = extract_result_mentions(manuscript, vocab)
    by_loc = {mn.location: mn for mn in mentions}

    lp = by_loc["cell:tbl-lp:4:1"]
    assert (lp.metric_name, lp.value, lp.subject) == ("MRR", Decimal("0.355"), "CompGCN")
    assert lp.task == "link prediction" and lp.dataset == "FB15k-237"

    nc = by_loc["cell:tbl-nc:3:1"]
    assert nc.value == Decimal("85.3")
    assert nc.unit == "percent"  # from the "(%)" column header
    assert nc.task == "node classification"

    basis = by_loc["cell:tbl-basis:1:1"]
    assert basis.value == Decimal("0.350") and basis.subject == "CompGCN (B=5)"

    gc_best = by_loc["cell:tbl-gc:1:1"]
    assert gc_best.subject == "GIN" and gc_best.value == Decimal("92.6")
