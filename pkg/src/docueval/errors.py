"""Shared exception hierarchy.

Every error that can cross a module boundary lives here so the service API
and CLI can map exception classes to wire codes / exit codes in one place.
"""

from __future__ import annotations

import re


class DocuevalError(Exception):
    """Base class for all domain errors."""


# --- ingestion ---------------------------------------------------------------

class InvalidEncoding(DocuevalError):
    pass


class UnknownDocument(DocuevalError):
    pass


class UnknownSegment(DocuevalError):
    pass


# --- retrieval ---------------------------------------------------------------

class DimensionMismatch(DocuevalError):
    pass


# --- criteria ----------------------------------------------------------------

class DuplicateCriterionName(DocuevalError):
    pass


class NonPositiveWeight(DocuevalError):
    pass


class UnknownEvaluator(DocuevalError):
    pass


class EmptyGuidance(DocuevalError):
    pass


# --- engine ------------------------------------------------------------------

class BudgetTooSmall(DocuevalError):
    pass


class MalformedOutput(DocuevalError):
    pass


class ScoreOutOfRange(DocuevalError):
    pass


class MissingScore(DocuevalError):
    pass


class UnknownProvider(DocuevalError):
    pass


class ProviderError(DocuevalError):
    pass


class GuardrailBlocked(DocuevalError):
    """Raised when a blocking guardrail finding stops a pipeline stage."""

    def __init__(self, message: str, findings: list | None = None):
        super().__init__(message)
        self.findings = findings or []


class PartialFailure(DocuevalError):
    """One or more criteria failed during a run.

    ``errors`` maps criterion_id -> error message; ``run`` holds the stored
    failed run when available.
    """

    def __init__(self, message: str, errors: dict[str, str], run=None):
        super().__init__(message)
        self.errors = errors
        self.run = run


# --- oversight ---------------------------------------------------------------

class InvalidState(DocuevalError):
    pass


class PrematureReveal(DocuevalError):
    pass


class ResultsGated(DocuevalError):
    pass


class RunPending(DocuevalError):
    pass


class UnknownSession(DocuevalError):
    pass


class UnknownTarget(DocuevalError):
    pass


class SubjectMismatch(DocuevalError):
    pass


class ChainCorruption(DocuevalError):
    pass


# --- persistence -------------------------------------------------------------

class UnknownRun(DocuevalError):
    pass


class CorruptRecord(DocuevalError):
    pass


class WriteOnceViolation(DocuevalError):
    pass


_CAMEL_RE = re.compile(r"(?<!^)(?=[A-Z])")


def error_code(exc: BaseException) -> str:
    """Snake-case wire code for an exception class, e.g. ``premature_reveal``."""
    return _CAMEL_RE.sub("_", type(exc).__name__).lower()
