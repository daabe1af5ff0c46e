import json
from decimal import Decimal
from fractions import Fraction

import pytest
import yaml
from click.testing import CliRunner

from claimcheck.errors import BackendUnavailable, ConfigInvalid
from claimcheck.harness.backends import (ExchangeLog, MockReplayBackend,
                                         read_exchange_log, request_digest)
from claimcheck.harness.cli import main as cli_main
from claimcheck.harness.config import load_config
from claimcheck.harness.stats import compute_episode_stats

from conftest import (DATASET_VOCAB, FIXTURES, TASK_VOCAB, trace_success,
                      trace_execution_failure, write_trace)


# --- config ------------------------------------------------------------------

def test_load_config_defaults(tmp_path):
    cfg = load_config(None)
    assert cfg.backend.kind == "mock_replay"
    assert cfg.tolerance_relative == 0.02
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert load_config(empty).max_claims == 10


def test_load_config_nested_and_strict(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({
        "max_claims": 5,
        "backend": {"kind": "http_chat", "endpoint": "http://x"},
        "search": {"kind": "off"},
    }))
    cfg = load_config(p)
    assert cfg.max_claims == 5 and cfg.backend.endpoint == "http://x"

    p.write_text("max_claimz: 5\n")
    with pytest.raises(ConfigInvalid, match="unknown config key"):
        load_config(p)
    p.write_text("backend:\n  kindd: x\n")
    with pytest.raises(ConfigInvalid, match="backend.kindd"):
        load_config(p)


@pytest.mark.parametrize("snippet", [
    {"schema_version": 2},
    {"budget_wall_clock_seconds": 0},
    {"tolerance_relative": -1},
    {"backend": {"kind": "telepathy"}},
    {"search": {"kind": "psychic"}},
])
def test_load_config_validation(tmp_path, snippet):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(snippet))
    with pytest.raises(ConfigInvalid):
        load_config(p)


# --- backends ----------------------------------------------------------------

def test_request_digest_canonical():
    a = request_digest("s", "u", "claims.v1")
    assert a == request_digest("s", "u", "claims.v1")
    assert a != request_digest("s", "u!", "claims.v1")


def test_mock_backend_digest_map_precedence():
    digest = request_digest("sys", "user", "claims.v1")
    backend = MockReplayBackend(digest_map={digest: "pinned"},
                                script={"claims.v1": "scripted"})
    assert backend.complete(system="sys", user="user", schema="claims.v1") == "pinned"
    assert backend.complete(system="sys", user="other", schema="claims.v1") == "scripted"


def test_mock_backend_list_script_consumes_in_order():
    backend = MockReplayBackend(script={"s": ["one", "two"]})
    outs = [backend.complete(system="", user="", schema="s") for _ in range(3)]
    assert outs == ["one", "two", "two"]  # clamps at the last entry


def test_mock_backend_missing_fixture():
    backend = MockReplayBackend(script={})
    with pytest.raises(BackendUnavailable):
        backend.complete(system="", user="", schema="ghost.v1")


def test_exchange_log_roundtrip(tmp_path):
    log_path = tmp_path / "x.jsonl"
    backend = MockReplayBackend(script={"s": "reply"}, log_path=log_path,
                                clock=lambda: 7.0)
    backend.current_episode_id = "ep-1"
    backend.complete(system="sy", user="abcd", schema="s")
    entries = read_exchange_log(log_path)
    assert len(entries) == 1
    e = entries[0]
    assert e["backend"] == "mock" and e["episode_id"] == "ep-1"
    assert e["tokens"] == (len("abcd") + len("reply")) // 4
    assert e["response"] == "reply" and e["ts"] == 7.0
    assert read_exchange_log(tmp_path / "missing.jsonl") == []


def test_exchange_log_disabled():
    ExchangeLog(None, "x").record(schema="s", digest="d", request={},
                                  response="", tokens=0)  # no-op, no error


# --- stats -------------------------------------------------------------------

def _group(tmp_path, name, successes, total=12):
    paths = []
    for i in range(total):
        events = trace_success(f"{name}-{i}", start_ts=0.0, end_ts=90.0) \
            if i < successes else trace_execution_failure(f"{name}-{i}")
        paths.append(write_trace(tmp_path / name / f"{i}.jsonl", events))
    return paths


def test_stats_success_rates_table(tmp_path):
    # [PAPER] per-model success column at 12 episodes each
    expected = ["83.3", "75.0", "66.7", "58.3", "50.0", "41.7"]
    for successes, want in zip(range(10, 4, -1), expected):
        paths = _group(tmp_path, f"g{successes}", successes)
        stats = compute_episode_stats(paths)
        # [DERIVED] independent oracle via exact fractions
        f = Fraction(successes * 1000, 12)
        oracle = Decimal(int(f) + (1 if f - int(f) >= Fraction(1, 2) else 0)) / 10
        assert stats.success_rate == oracle == Decimal(want)
        assert stats.episodes == 12 and stats.successes == successes


def test_stats_wall_clock_and_cost(tmp_path):
    paths = _group(tmp_path, "wc", successes=2, total=2)
    entries = [{"backend": "mock", "tokens": 3000},
               {"backend": "mock", "tokens": 1000}]
    stats = compute_episode_stats(paths, cost_entries=entries,
                                  price_table={"mock": 2.0})
    assert stats.mean_wall_clock_minutes == Decimal("1.5")
    assert stats.mean_cost == Decimal("4")  # (4000 tokens x $2/1k) / 2 episodes


def test_stats_empty():
    stats = compute_episode_stats([])
    assert stats.episodes == 0 and stats.success_rate == Decimal("0.0")
    assert stats.mean_wall_clock_minutes is None


# --- CLI ---------------------------------------------------------------------

@pytest.fixture()
def cli_config(tmp_path):
    p = tmp_path / "config.yaml"
    p.write_text(yaml.safe_dump({
        "tasks": TASK_VOCAB, "datasets": DATASET_VOCAB,
        "backend": {"kind": "mock_replay",
                    "script": str(FIXTURES / "backend_script.json")},
        "search": {"kind": "fixture",
                   "fixture": str(FIXTURES / "search_fixture.json")},
    }))
    return p


def test_cli_run_full(tmp_path, cli_config):
    out = tmp_path / "out"
    result = CliRunner().invoke(cli_main, [
        "run", "--paper", str(FIXTURES / "compgcn.md"),
        "--repo", str(FIXTURES / "repo_good"),
        "--config", str(cli_config), "--out", str(out),
        "--fixed-timestamp", "1700000000.0"])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "reports" / "report.json").read_text())
    assert report["manuscript_id"] == "compgcn-2019"
    assert (out / "traces").is_dir() and (out / "evidence" / "manifest.jsonl").exists()

    # re-render the stored report
    r2 = CliRunner().invoke(cli_main, [
        "report", "--in", str(out / "reports" / "report.json"), "--format", "md"])
    assert r2.exit_code == 0 and "Evidence report" in r2.output

    r3 = CliRunner().invoke(cli_main, [
        "report", "--in", str(out / "reports" / "report.json"), "--format", "pdf"])
    assert r3.exit_code == 7

    # stats and classify over the produced traces
    r4 = CliRunner().invoke(cli_main, ["stats", "--traces", str(out / "traces")])
    assert r4.exit_code == 0 and "success rate: 100.0%" in r4.output
    r5 = CliRunner().invoke(cli_main, ["classify", "--traces", str(out / "traces")])
    assert r5.exit_code == 0 and "Failure Type" in r5.output


def test_cli_exit_codes(tmp_path, cli_config):
    bad_cfg = tmp_path / "bad.yaml"
    bad_cfg.write_text("unknown_knob: 1\n")
    r = CliRunner().invoke(cli_main, [
        "run", "--paper", str(FIXTURES / "compgcn.md"),
        "--config", str(bad_cfg), "--out", str(tmp_path / "o1")])
    assert r.exit_code == 3

    bad_paper = tmp_path / "bad.md"
    bad_paper.write_text("just text, no front matter\n")
    r = CliRunner().invoke(cli_main, [
        "run", "--paper", str(bad_paper), "--config", str(cli_config),
        "--out", str(tmp_path / "o2")])
    assert r.exit_code == 4

    r = CliRunner().invoke(cli_main, ["run", "--out", "x"])  # missing --paper
    assert r.exit_code == 2

    mutated = tmp_path / "mut.json"
    mutated.write_text(json.dumps({
        "schema_version": 1, "manuscript_id": "m", "claims": [],
        "evidence": [], "judgments": [
            {"text": "conflicts with the table", "claim_id": None,
             "evidence_ids": ["ev-404"]}]}))
    r = CliRunner().invoke(cli_main, ["report", "--in", str(mutated)])
    assert r.exit_code == 7


def test_cli_verify_subcommand(tmp_path):
    r = CliRunner().invoke(cli_main, [
        "verify", "--repo", str(FIXTURES / "repo_noentry"),
        "--out", str(tmp_path / "v1")])
    assert r.exit_code == 0
    assert "artifact_level" in r.output
