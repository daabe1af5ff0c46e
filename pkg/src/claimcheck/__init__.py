"""claimcheck: an evidence-grounded review engine.

Parses a manuscript in a structured interchange format, extracts and
decomposes its claims, positions it against neighboring literature, executes
the linked code artifact in a budgeted sandbox with bounded repair, aligns
observed metrics against reported numbers, labels every claim on a
five-value scale, classifies failures, and emits a fully linked evidence
report.
"""

__version__ = "0.1.0"

from .labeling import (IN_CONFLICT, INCONCLUSIVE, LABELS, PARTIALLY_SUPPORTED,
                       SUPPORTED, SUPPORTED_BY_PAPER)

__all__ = [
    "IN_CONFLICT",
    "INCONCLUSIVE",
    "LABELS",
    "PARTIALLY_SUPPORTED",
    "SUPPORTED",
    "SUPPORTED_BY_PAPER",
    "__version__",
]
