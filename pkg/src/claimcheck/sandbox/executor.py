"""Budgeted task execution and output archival."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import signal
import subprocess
import time
from pathlib import Path

from .environment import EnvHandle
from .types import ExecutionRecord, Task, Workspace
from .workspace import repo_root


class EvidenceStore:
    """Content-addressed archive of execution outputs plus a manifest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.root / "manifest.jsonl"

    def archive_file(self, src: Path, episode_id: str, task_id: str,
                     logical_path: str) -> str:
        digest = hashlib.sha256(src.read_bytes()).hexdigest()
        obj = self.root / "objects" / digest
        if not obj.exists():
            shutil.copyfile(src, obj)
        entry = {"episode_id": episode_id, "task_id": task_id,
                 "logical_path": logical_path, "digest": digest,
                 "object_path": f"objects/{digest}"}
        with self.manifest_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return f"objects/{digest}"

    def manifest(self) -> list[dict]:
        if not self.manifest_path.exists():
            return []
        return [json.loads(line) for line in
                self.manifest_path.read_text().splitlines() if line.strip()]

    def read(self, archived_path: str) -> bytes:
        return (self.root / archived_path).read_bytes()

    def exists(self, archived_path: str) -> bool:
        return (self.root / archived_path).is_file()


def execute_task(t: Task, env: EnvHandle, ws: Workspace, *,
                 grace: float = 1.0, trace=None, archiver=None) -> ExecutionRecord:
    """Run one task under its budget; timeouts and nonzero exits are recorded
    outcomes, not errors. The kill is process-group-wide.

    ``archiver(stdout_rel, stderr_rel)`` runs after stream capture and returns
    the archived paths recorded on the ExecutionRecord, so the task_end trace
    event carries them.
    """
    cwd = repo_root(ws)
    logs = Path(ws.root) / "logs"
    logs.mkdir(exist_ok=True)
    n = len(list(logs.glob(f"{t.id}.*.stdout")))
    stdout_rel = f"logs/{t.id}.{n}.stdout"
    stderr_rel = f"logs/{t.id}.{n}.stderr"
    stdout_path = Path(ws.root) / stdout_rel
    stderr_path = Path(ws.root) / stderr_rel

    if trace:
        trace.emit("task_start", {"task_id": t.id, "command": list(t.command)})

    command = list(t.command)
    if command and command[0] in ("python", "python3"):
        command[0] = env.python

    timed_out = False
    started = time.time()
    with stdout_path.open("wb") as out, stderr_path.open("wb") as err:
        proc = subprocess.Popen(command, cwd=cwd, stdout=out, stderr=err,
                                env=env.env_vars(), start_new_session=True)
        try:
            proc.wait(timeout=t.budget.wall_clock_limit)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
            proc.wait(timeout=grace)
    ended = time.time()

    stdout_trunc = _truncate(stdout_path, t.budget.max_output_bytes)
    stderr_trunc = _truncate(stderr_path, t.budget.max_output_bytes)

    archived: tuple[str, ...] = ()
    if archiver is not None:
        archived = tuple(archiver(stdout_rel, stderr_rel))

    record = ExecutionRecord(
        task_id=t.id, command=tuple(t.command),
        return_code=proc.returncode if proc.returncode is not None else -1,
        started=started, ended=ended,
        stdout_path=stdout_rel, stderr_path=stderr_rel,
        stdout_truncated=stdout_trunc, stderr_truncated=stderr_trunc,
        timed_out=timed_out, archived_paths=archived)
    if trace:
        trace.emit("task_end", record.to_dict())
    return record


def _truncate(path: Path, cap: int) -> bool:
    if path.stat().st_size > cap:
        with path.open("rb+") as fh:
            fh.truncate(cap)
        return True
    return False


def archive_outputs(t: Task, ws: Workspace, store: EvidenceStore, *,
                    extra_files: tuple[str, ...] = (), trace=None) -> list[str]:
    """Copy files matching the task's declared output patterns (plus its
    captured streams) into the evidence store; originals untouched."""
    root = repo_root(ws)
    archived: list[str] = []
    matched: list[Path] = []
    for pattern in t.output_patterns:
        matched.extend(p for p in sorted(root.glob(pattern)) if p.is_file())
    for rel in extra_files:
        p = Path(ws.root) / rel
        if p.is_file():
            matched.append(p)
    seen: set[Path] = set()
    for p in matched:
        if p in seen:
            continue
        seen.add(p)
        base = root if root in p.parents or p == root else Path(ws.root)
        logical = f"{t.id}/{p.relative_to(base)}"
        archived.append(store.archive_file(p, ws.episode_id, t.id, logical))
        if trace:
            trace.emit("archive", {"task_id": t.id, "logical_path": logical,
                                   "archived_path": archived[-1]})
    return archived
