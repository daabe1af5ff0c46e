"""Command-line interface.

Exit codes (frozen; see README):
  0 success, 2 usage error (click), 3 invalid config, 4 manuscript parse
  error, 5 backend error, 6 artifact/sandbox error, 7 report error,
  1 any other engine error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .. import errors as E
from ..failure import NOT_FAILED, classify_failure, render_failure_table, tabulate_failures
from ..report import UnknownFormat, verify_report_dict
from ..sandbox import ArtifactRef, Budget, EpisodeRunner, deterministic_episode_id
from ..sandbox.trace import read_trace
from .backends import read_exchange_log
from .config import load_config
from .pipeline import run_pipeline
from .stats import compute_episode_stats

EXIT_CONFIG = 3
EXIT_PARSE = 4
EXIT_BACKEND = 5
EXIT_SANDBOX = 6
EXIT_REPORT = 7

_ERROR_EXITS: list[tuple[type, int]] = [
    (E.ConfigInvalid, EXIT_CONFIG),
    (E.MalformedSource, EXIT_PARSE),
    (E.EmptyDocument, EXIT_PARSE),
    (E.BackendUnavailable, EXIT_BACKEND),
    (E.SchemaViolation, EXIT_BACKEND),
    (E.NoClaimsFound, EXIT_BACKEND),
    (E.ArtifactUnreachable, EXIT_SANDBOX),
    (E.AmbiguousArtifact, EXIT_SANDBOX),
    (E.NoRunnableTasks, EXIT_SANDBOX),
    (E.EnvBuildFailed, EXIT_SANDBOX),
    (E.BudgetExhausted, EXIT_SANDBOX),
    (E.IncompleteTrace, EXIT_SANDBOX),
    (UnknownFormat, EXIT_REPORT),
    (E.ReportLinkError, EXIT_REPORT),
]


def _exit_code(exc: Exception) -> int:
    for etype, code in _ERROR_EXITS:
        if isinstance(exc, etype):
            return code
    return 1


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except E.ClaimcheckError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


@click.group()
def main():
    """Evidence-grounded review engine."""


@main.command()
@click.option("--paper", required=True, type=click.Path(exists=True),
              help="Manuscript in the interchange format.")
@click.option("--repo", default=None, help="Linked artifact (URL or local path).")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--backend", "backend_name", default=None,
              help="Override backend kind (mock_replay or http_chat).")
@click.option("--budget-minutes", default=None, type=float,
              help="Override per-task wall-clock budget.")
@click.option("--offline", is_flag=True,
              help="Force fixture search and mock backend.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--fixed-timestamp", default=None, type=float,
              help="Normalize all report timestamps to this value.")
def run(paper, repo, config_path, backend_name, budget_minutes, offline,
        out_dir, fixed_timestamp):
    """Run the full pipeline and write the evidence report."""
    cfg = _guard(load_config, config_path)
    if backend_name:
        cfg.backend.kind = backend_name
    if budget_minutes:
        cfg.budget_wall_clock_seconds = budget_minutes * 60
    if offline:
        cfg.backend.kind = "mock_replay"
        if cfg.search.kind == "http":
            cfg.search.kind = "fixture" if cfg.search.fixture else "off"
        cfg.network_allowed = False
    report = _guard(run_pipeline, paper, repo, cfg, out_dir,
                    fixed_timestamp=fixed_timestamp)
    click.echo(f"report written to {Path(out_dir) / 'reports' / 'report.json'} "
               f"({len(report.labeled_claims)} claim(s))")


@main.command()
@click.option("--repo", required=True, help="Artifact (URL or local path).")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def verify(repo, config_path, out_dir):
    """Sandbox-only verification episode on a repository (no claims)."""
    cfg = _guard(load_config, config_path)

    def go():
        episode_id = deterministic_episode_id("adhoc", str(repo))
        runner = EpisodeRunner(
            out_dir, episode_id,
            budget=Budget(wall_clock_limit=cfg.budget_wall_clock_seconds,
                          max_output_bytes=cfg.budget_max_output_bytes,
                          max_repair_attempts=cfg.budget_max_repair_attempts),
            protected_globs=tuple(cfg.protected_globs),
            grace=cfg.grace_seconds,
            network_allowed=cfg.network_allowed,
            argument_defaults=dict(cfg.repair_argument_defaults),
            output_patterns=tuple(cfg.output_patterns),
            env_provider=cfg.env_provider)
        runner.run(ArtifactRef(source=str(repo)), claims=[])
        episode = runner.finalize("failed", aligned_count=0)
        fr = classify_failure(runner.trace.events)
        status = "not_failed" if fr == NOT_FAILED else fr.failure_type
        click.echo(f"episode {episode.episode_id}: {len(episode.records)} task(s) "
                   f"executed, classification {status}")
        click.echo(f"trace: {episode.trace_path}")

    _guard(go)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="Stored machine report (report.json).")
@click.option("--format", "fmt", default="markdown")
@click.option("--out", "out_path", default=None, type=click.Path())
def report(in_path, fmt, out_path):
    """Re-render a stored machine report."""
    def go():
        data = json.loads(Path(in_path).read_text())
        violations = verify_report_dict(data)
        if violations:
            raise E.ReportLinkError("; ".join(violations))
        if fmt in ("json", "machine"):
            rendered = (json.dumps(data, indent=2, sort_keys=True,
                                   ensure_ascii=False) + "\n").encode()
        elif fmt in ("md", "markdown", "human"):
            rendered = _markdown_from_dict(data).encode()
        else:
            raise UnknownFormat(fmt)
        if out_path:
            Path(out_path).write_bytes(rendered)
            click.echo(f"written to {out_path}")
        else:
            click.echo(rendered.decode())

    _guard(go)


def _markdown_from_dict(d: dict) -> str:
    lines = [f"# Evidence report: {d.get('manuscript_id', '?')}", ""]
    for c in d.get("claims", []):
        claim = c.get("claim", {})
        label = c.get("label", {})
        lines.append(f"### {claim.get('id')} — {label.get('value')}")
        lines.append("")
        lines.append(claim.get("statement", ""))
        lines.append("")
        if label.get("evidence_ids"):
            lines.append("Evidence: " + ", ".join(label["evidence_ids"]))
        lines.append("")
    for j in d.get("judgments", []):
        suffix = f" [{', '.join(j.get('evidence_ids', []))}]" \
            if j.get("evidence_ids") else ""
        lines.append(f"- {j.get('text', '')}{suffix}")
    lines.append("")
    return "\n".join(lines)


@main.command()
@click.option("--traces", "traces_dir", required=True, type=click.Path(exists=True))
@click.option("--cost-log", default=None, type=click.Path(exists=True))
@click.option("--price-table", default=None, type=click.Path(exists=True),
              help="JSON mapping backend name to $ per 1k tokens.")
def stats(traces_dir, cost_log, price_table):
    """Episode statistics over stored traces."""
    def go():
        paths = sorted(Path(traces_dir).glob("*.jsonl"))
        entries = read_exchange_log(cost_log) if cost_log else None
        prices = json.loads(Path(price_table).read_text()) if price_table else None
        s = compute_episode_stats(paths, cost_entries=entries, price_table=prices)
        click.echo(f"episodes: {s.episodes}")
        click.echo(f"successes: {s.successes}")
        click.echo(f"success rate: {s.success_rate}%")
        if s.mean_wall_clock_minutes is not None:
            click.echo(f"mean wall clock: {s.mean_wall_clock_minutes} min")
        if s.mean_cost is not None:
            click.echo(f"mean cost: ${s.mean_cost}")

    _guard(go)


@main.command()
@click.option("--traces", "traces_dir", required=True, type=click.Path(exists=True))
def classify(traces_dir):
    """Failure tabulation over stored traces."""
    def go():
        records = []
        total = 0
        for path in sorted(Path(traces_dir).glob("*.jsonl")):
            events = read_trace(path)
            total += 1
            fr = classify_failure(events)
            if fr != NOT_FAILED:
                records.append(fr)
        tab = tabulate_failures(records, total)
        click.echo(render_failure_table(tab))

    _guard(go)


if __name__ == "__main__":
    main()
