"""Exception and warning types shared across the toolkit.

Loaders raise LoadError subclasses carrying file/line context so the CLI can
point at the offending row. Everything else derives from BudgetRankError so
callers can catch domain failures with a single except clause.
"""

from __future__ import annotations


class BudgetRankError(Exception):
    """Base class for every error raised by this package."""


class LoadError(BudgetRankError):
    """A problem in an input file; remembers where it was found."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


# --- file loading -----------------------------------------------------------

class MalformedRow(LoadError):
    pass


class EmptyField(LoadError):
    pass


class DuplicatePair(LoadError):
    pass


class JsonSyntax(LoadError):
    pass


class UnknownSector(LoadError):
    pass


class DuplicateId(LoadError):
    pass


class DateYearMismatch(LoadError):
    pass


class MissingLabels(LoadError):
    pass


class BadHeader(LoadError):
    pass


class NonFiniteValue(LoadError):
    pass


class NonPositivePrice(LoadError):
    pass


class DuplicateEntry(LoadError):
    pass


# --- vectors and geometry ----------------------------------------------------

class DimensionMismatch(BudgetRankError):
    pass


class ZeroNorm(BudgetRankError):
    pass


# --- embedding adapter -------------------------------------------------------

class MissingSectorVector(BudgetRankError):
    pass


class MissingVector(BudgetRankError):
    pass


class EmptyBatch(BudgetRankError):
    pass


class TrainingDiverged(BudgetRankError):
    pass


# --- classification evaluation -----------------------------------------------

class MissingPrediction(BudgetRankError):
    pass


class UnknownSegment(BudgetRankError):
    pass


# --- market data --------------------------------------------------------------

class NoLaterDate(BudgetRankError):
    pass


class NoUsableCompanies(BudgetRankError):
    pass


class MixedDates(BudgetRankError):
    pass


class DuplicateSector(BudgetRankError):
    pass


# --- ranking models ------------------------------------------------------------

class NoSegments(BudgetRankError):
    pass


class SingleClass(BudgetRankError):
    pass


class Diverged(BudgetRankError):
    pass


class NoPairs(BudgetRankError):
    pass


class SectorSetMismatch(BudgetRankError):
    pass


# --- LLM prompts / responses ----------------------------------------------------

class EmptyTranscript(BudgetRankError):
    pass


class EmptyExcerpt(BudgetRankError):
    pass


class NotJson(BudgetRankError):
    pass


class WrongShape(BudgetRankError):
    pass


class NotANumber(BudgetRankError):
    pass


class OutOfRange(BudgetRankError):
    pass


class RequestError(BudgetRankError):
    """Base for failures talking to the chat-completion endpoint."""


class Transport(RequestError):
    pass


class Timeout(RequestError):
    pass


class AuthMissing(RequestError):
    pass


class HttpStatus(RequestError):
    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(message or f"HTTP status {status}")


# --- warnings --------------------------------------------------------------------

class EmptySplitWarning(UserWarning):
    """A temporal split produced an empty train/val/test partition."""
