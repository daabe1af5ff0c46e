"""Exception taxonomy for the review engine.

Each error family maps to a stable CLI exit code (see harness.cli).
"""

from __future__ import annotations


class ClaimcheckError(Exception):
    """Base class for all engine errors."""


# --- document model ---------------------------------------------------------

class MalformedSource(ClaimcheckError):
    """Input document does not conform to the interchange grammar."""


class EmptyDocument(ClaimcheckError):
    """Document contains no sections."""


class DanglingLocation(ClaimcheckError):
    """A location reference does not resolve inside the manuscript."""


# --- claims / backend -------------------------------------------------------

class BackendUnavailable(ClaimcheckError):
    """The analysis backend could not be reached."""


class SchemaViolation(ClaimcheckError):
    """Backend output failed schema validation after the retry budget."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []


class NoClaimsFound(ClaimcheckError):
    """The backend returned a valid but empty claim list."""


class UnresolvableScope(ClaimcheckError):
    """A claim scope names a task/dataset/metric absent from the manuscript."""


# --- positioning ------------------------------------------------------------

class SearchUnavailable(ClaimcheckError):
    """The scholarly search handle is unreachable."""


# --- sandbox ----------------------------------------------------------------

class ArtifactUnreachable(ClaimcheckError):
    """The linked artifact could not be fetched or found."""


class AmbiguousArtifact(ClaimcheckError):
    """The artifact contains multiple candidate project roots."""


class EnvBuildFailed(ClaimcheckError):
    """An environment build step returned a nonzero exit code."""


class BudgetExhausted(ClaimcheckError):
    """A wall-clock or resource budget was exceeded during environment build."""


class NoRunnableTasks(ClaimcheckError):
    """No runnable task could be derived from the repository."""


class RepairRefused(ClaimcheckError):
    """A proposed repair was rejected by policy."""

    OUTSIDE_WHITELIST = "outside whitelist"
    TOUCHES_PROTECTED = "touches protected file"
    ATTEMPTS_EXHAUSTED = "attempts exhausted"

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"repair refused: {reason}" + (f" ({detail})" if detail else ""))
        self.reason = reason
        self.detail = detail


class IncompleteTrace(ClaimcheckError):
    """Episode trace is missing its terminal event."""


# --- labeling / report ------------------------------------------------------

class EmptyInput(ClaimcheckError):
    """An aggregation received an empty input list."""


class BundleMismatch(ClaimcheckError):
    """An evidence bundle does not match the claim's decomposition."""


class UnknownFormat(ClaimcheckError):
    """Unknown report format selector."""


class ReportLinkError(ClaimcheckError):
    """Report failed link-completeness verification at render time."""


# --- harness ----------------------------------------------------------------

class ConfigInvalid(ClaimcheckError):
    """Configuration file failed validation (unknown key, bad value)."""
