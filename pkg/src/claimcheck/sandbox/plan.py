"""Task-plan derivation from repository contents.

The plan is fixed before any execution; tiers are tried in priority order
readme > config > entry_script > structure_heuristic and the first tier that
yields runnable commands wins.
"""

from __future__ import annotations

import re
import shlex
from pathlib import Path

from ..claims import Claim
from ..docmodel import normalize_token
from ..errors import NoRunnableTasks
from .types import Budget, Task

_FENCE_RE = re.compile(r"^```")
_PROMPT_RE = re.compile(r"^\s*\$\s+(.*)$")
_RUNNERS = ("python", "python3", "bash", "sh")
_NON_TASK_PREFIXES = ("pip ", "pip3 ", "conda ", "git ", "cd ", "wget ", "curl ")
_CONFIG_EXTS = (".yaml", ".yml", ".json", ".ini", ".cfg", ".toml")


def leaf_claims(claims: list[Claim]) -> list[Claim]:
    """The alignable units: subclaims when decomposed, the claim itself otherwise."""
    leaves: list[Claim] = []
    for c in claims:
        leaves.extend(c.subclaims if c.subclaims else [c])
    return leaves


def _runnable(line: str) -> tuple[str, ...] | None:
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    if any(line.startswith(p) for p in _NON_TASK_PREFIXES):
        return None
    try:
        parts = shlex.split(line)
    except ValueError:
        return None
    if not parts:
        return None
    head = parts[0]
    if head in _RUNNERS or head.startswith("./") or head == "make":
        return tuple(parts)
    return None


def _readme_commands(repo: Path) -> list[tuple[str, ...]]:
    commands: list[tuple[str, ...]] = []
    for readme in sorted(repo.glob("README*")):
        in_fence = False
        for line in readme.read_text(errors="replace").splitlines():
            if _FENCE_RE.match(line.strip()):
                in_fence = not in_fence
                continue
            if in_fence:
                cmd = _runnable(line)
                if cmd:
                    commands.append(cmd)
            else:
                m = _PROMPT_RE.match(line)
                if m:
                    cmd = _runnable(m.group(1))
                    if cmd:
                        commands.append(cmd)
    return commands


def _entry_scripts(repo: Path) -> list[Path]:
    entries = []
    for p in sorted(repo.glob("*.py")):
        text = p.read_text(errors="replace")
        if "__main__" in text or text.startswith("#!"):
            entries.append(p)
    return entries


def _config_commands(repo: Path) -> list[tuple[str, ...]]:
    entries = _entry_scripts(repo)
    commands: list[tuple[str, ...]] = []
    for entry in entries:
        text = entry.read_text(errors="replace")
        for cfg in sorted(repo.rglob("*")):
            if cfg.suffix in _CONFIG_EXTS and cfg.is_file():
                rel = cfg.relative_to(repo)
                if cfg.name in text or str(rel) in text:
                    commands.append(("python", entry.name, "--config", str(rel)))
    return commands


def _structure_commands(repo: Path) -> list[tuple[str, ...]]:
    commands: list[tuple[str, ...]] = []
    for main in sorted(repo.rglob("__main__.py")):
        pkg = main.parent.relative_to(repo)
        if str(pkg) != ".":
            commands.append(("python", "-m", str(pkg).replace("/", ".")))
    makefile = repo / "Makefile"
    if makefile.exists():
        for target in ("run", "test", "reproduce"):
            if re.search(rf"^{target}:", makefile.read_text(errors="replace"), re.M):
                commands.append(("make", target))
    return commands


def _command_context(repo: Path, command: tuple[str, ...]) -> str:
    """Text used for claim-target matching: the command plus any config it names."""
    text = " ".join(command)
    for part in command:
        if part.endswith(_CONFIG_EXTS):
            cfg = repo / part
            if cfg.exists():
                text += " " + cfg.read_text(errors="replace")
    return normalize_token(text)


def _targets_for(command_text: str, leaves: list[Claim]) -> tuple[str, ...]:
    words = set(command_text.split())
    targets = []
    for leaf in leaves:
        scope = leaf.scope
        ok = True
        for dim in (scope.tasks, scope.datasets, scope.metrics):
            if dim and not any(v in command_text for v in dim):
                ok = False
                break
        if ok and scope.conditions:
            cond_words = {w for c in scope.conditions for w in c.split()}
            if not (cond_words & words):
                ok = False
        if ok and not scope.is_universal:
            targets.append(leaf.id)
    return tuple(targets)


def derive_task_plan(repo: str | Path, claims: list[Claim], *,
                     budget: Budget | None = None,
                     output_patterns: tuple[str, ...] = ("results*.txt", "results*.json",
                                                         "*.log", "outputs/**")) -> list[Task]:
    """Derive the fixed task plan and map tasks to claim targets."""
    repo = Path(repo)
    budget = budget or Budget()
    leaves = leaf_claims(claims)

    tiers = (("readme", _readme_commands(repo)),
             ("config", _config_commands(repo)),
             ("entry_script", [("python", p.name) for p in _entry_scripts(repo)]),
             ("structure_heuristic", _structure_commands(repo)))

    for origin, commands in tiers:
        deduped: list[tuple[str, ...]] = []
        for cmd in commands:
            if cmd not in deduped:
                deduped.append(cmd)
        if deduped:
            return [
                Task(id=f"t{idx:02d}", command=cmd, origin=origin, budget=budget,
                     claim_targets=_targets_for(_command_context(repo, cmd), leaves),
                     output_patterns=output_patterns)
                for idx, cmd in enumerate(deduped, start=1)]
    raise NoRunnableTasks(f"no runnable entry points found under {repo}")
