"""Bounded repair: whitelist-restricted environment/wrapper-level fixes.

Repairs never touch protected files (model, loss, or evaluation logic); a
proposal that would is refused and recorded, not applied.
"""

from __future__ import annotations

import fnmatch
import re
from pathlib import Path

from ..errors import RepairRefused
from .environment import EnvHandle
from .types import ExecutionRecord, RepairAction, Task, Workspace
from .workspace import repo_root

_MISSING_MODULE_RE = re.compile(r"ModuleNotFoundError: No module named '([^']+)'")
_MISSING_FILE_RE = re.compile(
    r"(?:FileNotFoundError:.*?|No such file or directory:?)\s*'?([\w./-]+\.\w+)'?")
_MISSING_ARG_RE = re.compile(r"the following arguments are required:\s*(--[\w-]+)")
_TRACEBACK_FILE_RE = re.compile(r'File "([^"]+)", line \d+')


def is_protected(ws: Workspace, rel_path: str) -> bool:
    root = repo_root(ws)
    target = (root / rel_path).resolve()
    for pattern in ws.protected_globs:
        for p in root.glob(pattern):
            if p.resolve() == target:
                return True
        if fnmatch.fnmatch(rel_path, pattern):
            return True
        # a bare "**/<name>" pattern also protects not-yet-existing files
        if pattern.startswith("**/") and "/" not in pattern[3:]:
            if fnmatch.fnmatch(Path(rel_path).name, pattern[3:]):
                return True
    return False


def diagnose(record: ExecutionRecord, ws: Workspace) -> RepairAction | None:
    """Map a failure signature to a whitelisted repair proposal, or None."""
    stderr = (Path(ws.root) / record.stderr_path).read_text(errors="replace")

    m = _MISSING_MODULE_RE.search(stderr)
    if m:
        return RepairAction(kind="install_dependency", detail=m.group(1),
                            task_id=record.task_id)
    m = _MISSING_ARG_RE.search(stderr)
    if m:
        return RepairAction(kind="add_missing_argument", detail=m.group(1),
                            task_id=record.task_id)
    m = _MISSING_FILE_RE.search(stderr)
    if m:
        return RepairAction(kind="fix_path", detail=m.group(1),
                            files_touched=(m.group(1),), task_id=record.task_id)
    # Last resort: a traceback rooted in a repo file suggests a launch-script
    # problem; propose a wrapper patch against that file.
    root = repo_root(ws)
    for hit in _TRACEBACK_FILE_RE.finditer(stderr):
        p = Path(hit.group(1))
        try:
            rel = str(p.resolve().relative_to(root.resolve())) if p.is_absolute() \
                else str(p)
        except ValueError:
            continue
        if (root / rel).exists():
            return RepairAction(kind="patch_launch_wrapper", detail=f"fault in {rel}",
                                files_touched=(rel,), task_id=record.task_id)
    return None


def attempt_bounded_repair(record: ExecutionRecord, t: Task, env: EnvHandle,
                           ws: Workspace, *, attempts_used: int,
                           kinds_used: set[str],
                           argument_defaults: dict[str, str] | None = None,
                           trace=None) -> tuple[RepairAction, Task]:
    """Validate and apply one repair; returns the action and the (possibly
    rewritten) task to re-queue. Raises RepairRefused otherwise."""

    def refuse(reason: str, detail: str = "") -> RepairRefused:
        err = RepairRefused(reason, detail)
        if trace:
            trace.emit("repair_refused", {"task_id": t.id, "reason": reason,
                                          "detail": detail})
        return err

    if attempts_used >= t.budget.max_repair_attempts:
        raise refuse(RepairRefused.ATTEMPTS_EXHAUSTED,
                     f"{attempts_used} of {t.budget.max_repair_attempts} used")

    action = diagnose(record, ws)
    if action is None:
        raise refuse(RepairRefused.OUTSIDE_WHITELIST, "no whitelisted fix applies")
    if trace:
        trace.emit("repair_proposed", {"task_id": t.id, "action": action.to_dict()})
    if action.kind in kinds_used:
        raise refuse(RepairRefused.OUTSIDE_WHITELIST,
                     f"repair kind {action.kind} already attempted for this task")
    for rel in action.files_touched:
        if is_protected(ws, rel):
            raise refuse(RepairRefused.TOUCHES_PROTECTED, rel)

    new_task = _apply(action, t, env, ws, argument_defaults or {}, refuse)
    if trace:
        trace.emit("repair_applied", {"task_id": t.id, "action": action.to_dict()})
    return action, new_task


def _apply(action: RepairAction, t: Task, env: EnvHandle, ws: Workspace,
           argument_defaults: dict[str, str], refuse) -> Task:
    from dataclasses import replace

    if action.kind == "install_dependency":
        if not env.network_allowed:
            raise refuse(RepairRefused.OUTSIDE_WHITELIST,
                         "network disabled for this episode")
        env.install(action.detail)
        return t

    if action.kind == "add_missing_argument":
        arg = action.detail.lstrip("-")
        if arg not in argument_defaults:
            raise refuse(RepairRefused.OUTSIDE_WHITELIST,
                         f"no known default for {action.detail}")
        return replace(t, command=t.command + (action.detail, argument_defaults[arg]))

    if action.kind == "fix_path":
        root = repo_root(ws)
        missing = root / action.detail
        candidates = [p for p in root.rglob(Path(action.detail).name) if p.is_file()]
        if missing.exists() or not candidates:
            raise refuse(RepairRefused.OUTSIDE_WHITELIST,
                         f"no relocation candidate for {action.detail}")
        missing.parent.mkdir(parents=True, exist_ok=True)
        missing.symlink_to(candidates[0])
        return t

    if action.kind == "patch_launch_wrapper":
        rel = action.files_touched[0]
        target = repo_root(ws) / rel
        text = target.read_text(errors="replace")
        # Only one concrete wrapper fix is automated: a stale interpreter
        # token in a shell launcher is rewritten to the episode interpreter.
        # Anything else is out of reach for safe repair.
        if target.suffix == ".sh" and re.search(r"\bpython[\d.]*\s", text):
            target.write_text(
                re.sub(r"\bpython[\d.]*(?=\s)", env.python, text))
            return t
        raise refuse(RepairRefused.OUTSIDE_WHITELIST,
                     f"no safe automated patch for {rel}")

    raise refuse(RepairRefused.OUTSIDE_WHITELIST, action.kind)
