"""Exception hierarchy shared by every faceaudit module.

Each error carries a machine-readable ``kind`` string so callers (and the
CLI exit-code mapping) can branch on it without parsing messages.
"""

from __future__ import annotations


class FaceAuditError(Exception):
    """Base class for all toolkit errors."""

    kind = "error"

    def __init__(self, kind: str, message: str, record: str | None = None):
        self.kind = kind
        self.record = record
        if record is not None:
            message = f"{message} (record: {record})"
        super().__init__(f"{kind}: {message}")


class IngestError(FaceAuditError):
    """Input data violates a format or integrity rule; ingestion aborted."""


class AuditError(FaceAuditError, ValueError):
    """An operation's precondition failed (bad parameters, degenerate data)."""


class ReportError(FaceAuditError, ValueError):
    """A report cannot be serialized (e.g. a non-finite numeric field)."""
