import json
import sys
import zipfile
from pathlib import Path

import pytest

from claimcheck.claims import Claim, ClaimScope
from claimcheck.errors import (AmbiguousArtifact, ArtifactUnreachable,
                               IncompleteTrace, NoRunnableTasks, RepairRefused)
from claimcheck.failure import ARTIFACT_LEVEL, classify_failure
from claimcheck.sandbox import (ArtifactRef, Budget, EpisodeRunner, EnvHandle,
                                ExecutionRecord, Task, TraceWriter,
                                create_workspace, derive_task_plan,
                                deterministic_episode_id, execute_task,
                                load_episode, reconstruct_episode,
                                resolve_artifact, tree_digest)
from claimcheck.sandbox.repair import attempt_bounded_repair, is_protected
from claimcheck.sandbox.workspace import repo_root

from conftest import FIXTURES


# --- workspace and artifact resolution ---------------------------------------

def test_workspace_refuses_nonempty(tmp_path):
    ws = create_workspace(tmp_path, "ep-a")
    (Path(ws.root) / "junk.txt").write_text("x")
    with pytest.raises(ArtifactUnreachable):
        create_workspace(tmp_path, "ep-a")


def test_resolve_local_dir(tmp_path):
    ws = create_workspace(tmp_path, "ep-b")
    ref, repo = resolve_artifact(ArtifactRef(source=str(FIXTURES / "repo_good")), ws)
    assert (repo / "run.py").exists()
    assert ref.resolved_digest == tree_digest(repo)


def test_resolve_missing_path(tmp_path):
    ws = create_workspace(tmp_path, "ep-c")
    with pytest.raises(ArtifactUnreachable):
        resolve_artifact(ArtifactRef(source=str(tmp_path / "nope")), ws)


def test_resolve_zip_single_root(tmp_path):
    z = tmp_path / "one.zip"
    with zipfile.ZipFile(z, "w") as zf:
        zf.writestr("project/README.md", "```\npython run.py\n```\n")
        zf.writestr("project/run.py", "print('hi')\n")
    ws = create_workspace(tmp_path, "ep-d")
    _, repo = resolve_artifact(ArtifactRef(source=str(z)), ws)
    assert (repo / "run.py").exists()


def test_resolve_zip_two_roots_ambiguous(tmp_path):
    z = tmp_path / "two.zip"
    with zipfile.ZipFile(z, "w") as zf:
        zf.writestr("alpha/a.py", "")
        zf.writestr("beta/b.py", "")
    ws = create_workspace(tmp_path, "ep-e")
    with pytest.raises(AmbiguousArtifact):
        resolve_artifact(ArtifactRef(source=str(z)), ws)


# --- task plan ----------------------------------------------------------------

def _leaf(cid, tasks=(), datasets=(), conditions=()):
    return Claim(id=cid, kind="empirical", statement="s",
                 scope=ClaimScope.of(tasks=tasks, datasets=datasets,
                                     conditions=conditions),
                 locations=("span:intro.s1",))


def test_plan_readme_tier_and_targets():
    claims = [
        _leaf("lp", tasks=["link prediction"], datasets=["FB15k-237"]),
        _leaf("basis", tasks=["link prediction"], datasets=["FB15k-237"],
              conditions=["basis decomposition"]),
    ]
    plan = derive_task_plan(FIXTURES / "repo_good", claims)
    assert [t.origin for t in plan] == ["readme"] * 4
    assert plan[0].command[:2] == ("python", "run.py")
    # condition word "basis" only occurs in the fourth command
    assert plan[0].claim_targets == ("lp",)
    assert plan[3].claim_targets == ("lp", "basis")
    assert [t.id for t in plan] == ["t01", "t02", "t03", "t04"]


def test_plan_skips_install_lines(tmp_path):
    (tmp_path / "README.md").write_text(
        "```\npip install -r requirements.txt\ngit clone x\npython go.py\n```\n")
    (tmp_path / "go.py").write_text("print(1)\n")
    plan = derive_task_plan(tmp_path, [])
    assert [t.command for t in plan] == [("python", "go.py")]


def test_plan_entry_script_tier(tmp_path):
    (tmp_path / "main.py").write_text("if __name__ == '__main__':\n    pass\n")
    plan = derive_task_plan(tmp_path, [])
    assert plan[0].origin == "entry_script"
    assert plan[0].command == ("python", "main.py")


def test_plan_structure_tier_makefile(tmp_path):
    (tmp_path / "Makefile").write_text("reproduce:\n\techo hi\n")
    plan = derive_task_plan(tmp_path, [])
    assert plan[0].origin == "structure_heuristic"
    assert plan[0].command == ("make", "reproduce")


def test_plan_no_runnable_tasks():
    with pytest.raises(NoRunnableTasks):
        derive_task_plan(FIXTURES / "repo_noentry", [])


# --- executor ----------------------------------------------------------------

def _env_for(ws):
    return EnvHandle(python=sys.executable, site_dir=str(Path(ws.root) / "site"),
                     repo=str(repo_root(ws)))


def test_execute_truncates_output(tmp_path):
    ws = create_workspace(tmp_path, "ep-tr")
    repo = repo_root(ws)
    repo.mkdir()
    (repo / "noisy.py").write_text("print('x' * 10000)\n")
    t = Task(id="t01", command=("python", "noisy.py"), origin="readme",
             budget=Budget(wall_clock_limit=30, max_output_bytes=100))
    rec = execute_task(t, _env_for(ws), ws)
    assert rec.return_code == 0
    assert rec.stdout_truncated
    assert (Path(ws.root) / rec.stdout_path).stat().st_size == 100


# --- repair ------------------------------------------------------------------

def _failed_record(ws, stderr_text):
    p = Path(ws.root) / "logs"
    p.mkdir(exist_ok=True)
    (p / "t01.0.stderr").write_text(stderr_text)
    (p / "t01.0.stdout").write_text("")
    return ExecutionRecord(task_id="t01", command=("python", "run.py"),
                           return_code=1, started=0.0, ended=1.0,
                           stdout_path="logs/t01.0.stdout",
                           stderr_path="logs/t01.0.stderr")


def _repair_ws(tmp_path):
    ws = create_workspace(tmp_path, "ep-rp")
    repo_root(ws).mkdir()
    return ws


def test_is_protected(tmp_path):
    ws = _repair_ws(tmp_path)
    (repo_root(ws) / "evaluate.py").write_text("x = 1\n")
    assert is_protected(ws, "evaluate.py")
    assert not is_protected(ws, "run.py")


def test_repair_add_missing_argument(tmp_path):
    ws = _repair_ws(tmp_path)
    rec = _failed_record(ws, "error: the following arguments are required: --epochs")
    t = Task(id="t01", command=("python", "run.py"), origin="readme",
             budget=Budget())
    action, new_task = attempt_bounded_repair(
        rec, t, _env_for(ws), ws, attempts_used=0, kinds_used=set(),
        argument_defaults={"epochs": "1"})
    assert action.kind == "add_missing_argument"
    assert new_task.command == ("python", "run.py", "--epochs", "1")


def test_repair_fix_path_symlinks(tmp_path):
    ws = _repair_ws(tmp_path)
    (repo_root(ws) / "data").mkdir()
    (repo_root(ws) / "data" / "input.csv").write_text("1,2\n")
    rec = _failed_record(ws, "FileNotFoundError: 'input.csv'")
    t = Task(id="t01", command=("python", "run.py"), origin="readme", budget=Budget())
    action, _ = attempt_bounded_repair(rec, t, _env_for(ws), ws,
                                       attempts_used=0, kinds_used=set())
    assert action.kind == "fix_path"
    assert (repo_root(ws) / "input.csv").resolve().read_text() == "1,2\n"


def test_repair_patch_launch_wrapper(tmp_path):
    ws = _repair_ws(tmp_path)
    (repo_root(ws) / "launch.sh").write_text("#!/bin/sh\npython3.4 run.py\n")
    rec = _failed_record(ws, 'Traceback (most recent call last):\n'
                             '  File "launch.sh", line 2\nSomeError\n')
    t = Task(id="t01", command=("./launch.sh",), origin="readme", budget=Budget())
    env = _env_for(ws)
    action, _ = attempt_bounded_repair(rec, t, env, ws,
                                       attempts_used=0, kinds_used=set())
    assert action.kind == "patch_launch_wrapper"
    assert env.python in (repo_root(ws) / "launch.sh").read_text()


def test_repair_refused_outside_whitelist(tmp_path):
    ws = _repair_ws(tmp_path)
    rec = _failed_record(ws, "SegmentationFault: core dumped\n")
    t = Task(id="t01", command=("python", "run.py"), origin="readme", budget=Budget())
    with pytest.raises(RepairRefused) as exc:
        attempt_bounded_repair(rec, t, _env_for(ws), ws,
                               attempts_used=0, kinds_used=set())
    assert exc.value.reason == RepairRefused.OUTSIDE_WHITELIST


def test_repair_refused_attempts_exhausted(tmp_path):
    ws = _repair_ws(tmp_path)
    rec = _failed_record(ws, "ModuleNotFoundError: No module named 'abc_xyz'")
    t = Task(id="t01", command=("python", "run.py"), origin="readme",
             budget=Budget(max_repair_attempts=2))
    with pytest.raises(RepairRefused) as exc:
        attempt_bounded_repair(rec, t, _env_for(ws), ws,
                               attempts_used=2, kinds_used=set())
    assert exc.value.reason == RepairRefused.ATTEMPTS_EXHAUSTED


def test_repair_refused_repeated_kind(tmp_path):
    ws = _repair_ws(tmp_path)
    rec = _failed_record(ws, "ModuleNotFoundError: No module named 'abc_xyz'")
    t = Task(id="t01", command=("python", "run.py"), origin="readme", budget=Budget())
    with pytest.raises(RepairRefused):
        attempt_bounded_repair(rec, t, _env_for(ws), ws, attempts_used=1,
                               kinds_used={"install_dependency"})


def test_repair_refused_protected_file(tmp_path):
    ws = _repair_ws(tmp_path)
    (repo_root(ws) / "evaluate.py").write_text("raise ValueError('x')\n")
    rec = _failed_record(ws, 'Traceback (most recent call last):\n'
                             '  File "evaluate.py", line 1\nValueError: x\n')
    t = Task(id="t01", command=("python", "evaluate.py"), origin="readme",
             budget=Budget())
    with pytest.raises(RepairRefused) as exc:
        attempt_bounded_repair(rec, t, _env_for(ws), ws,
                               attempts_used=0, kinds_used=set())
    assert exc.value.reason == RepairRefused.TOUCHES_PROTECTED


# --- trace -------------------------------------------------------------------

def test_trace_rejects_unknown_event(tmp_path):
    writer = TraceWriter(tmp_path / "t.jsonl")
    with pytest.raises(ValueError):
        writer.emit("made_up_event", {})


def test_trace_seq_monotone_and_replay(tmp_path):
    path = tmp_path / "t.jsonl"
    clock = iter(range(100))
    writer = TraceWriter(path, clock=lambda: float(next(clock)))
    ws = {"root": "/w", "episode_id": "ep-x", "created_at": 0.0,
          "protected_globs": []}
    writer.emit("episode_start", {"episode_id": "ep-x", "workspace": ws,
                                  "artifact": {"source": "/r"}})
    writer.emit("artifact_resolved", {"digest": "d" * 64, "repo": "/w/repo"})
    rec = {"task_id": "t01", "command": ["python", "run.py"], "return_code": 0,
           "started": 1.5, "ended": 2.5, "stdout_path": "o", "stderr_path": "e",
           "stdout_truncated": False, "stderr_truncated": False,
           "timed_out": False, "archived_paths": ["objects/abc"]}
    writer.emit("task_end", rec)
    writer.emit("episode_end", {"outcome": "evidence_produced",
                                "aligned_count": 1, "env": {}, "plan": []})
    assert [ev["seq"] for ev in writer.events] == [1, 2, 3, 4]

    in_memory = reconstruct_episode(writer.events, str(path))
    from_file = load_episode(path)
    assert in_memory == from_file
    assert from_file.artifact.resolved_digest == "d" * 64
    assert from_file.records[0].archived_paths == ("objects/abc",)


def test_incomplete_trace(tmp_path):
    path = tmp_path / "t.jsonl"
    writer = TraceWriter(path)
    writer.emit("episode_start", {"episode_id": "ep-x", "workspace": {
        "root": "/w", "episode_id": "ep-x", "created_at": 0.0},
        "artifact": {"source": "/r"}})
    with pytest.raises(IncompleteTrace):
        load_episode(path)


# --- episodes ----------------------------------------------------------------

def test_deterministic_episode_id():
    a = deterministic_episode_id("m1", "/repo")
    assert a == deterministic_episode_id("m1", "/repo")
    assert a != deterministic_episode_id("m2", "/repo")
    assert a.startswith("ep-") and a.endswith("-001")


def test_episode_unreachable_artifact(tmp_path):
    runner = EpisodeRunner(tmp_path, "ep-x1")
    runner.run(ArtifactRef(source=str(tmp_path / "ghost")), claims=[])
    episode = runner.finalize("failed")
    assert episode.outcome == "failed"
    fr = classify_failure(runner.trace.events)
    assert fr.failure_type == ARTIFACT_LEVEL


def test_episode_no_runnable_tasks(tmp_path):
    runner = EpisodeRunner(tmp_path, "ep-x2")
    runner.run(ArtifactRef(source=str(FIXTURES / "repo_noentry")), claims=[])
    assert runner.stage_error[0] == "plan"
    runner.finalize("failed")
    fr = classify_failure(runner.trace.events)
    assert fr.failure_type == ARTIFACT_LEVEL


def test_episode_good_run_trace_equals_replay(tmp_path):
    runner = EpisodeRunner(tmp_path, "ep-x3")
    runner.run(ArtifactRef(source=str(FIXTURES / "repo_good")), claims=[])
    episode = runner.finalize("evidence_produced", aligned_count=3)
    assert episode == load_episode(runner.trace.path)
    assert len(episode.records) == 4
    assert all(r.return_code == 0 for r in episode.records)
    # archived stream files are content-addressed under the evidence store
    manifest = runner.store.manifest()
    assert all(e["object_path"].startswith("objects/") for e in manifest)
    assert json.loads((runner.trace.path).read_text().splitlines()[0])["seq"] == 1
