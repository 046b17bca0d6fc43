"""Exception types raised across the package.

Validation problems derive from :class:`ValidationError` and resource guards
from :class:`ResourceGuard`, which lets the CLI map them to exit codes.
"""


class SeqsubError(Exception):
    """Base class for all package errors."""


class ValidationError(SeqsubError, ValueError):
    """Invalid input: malformed sequences, files or instances."""


class ResourceGuard(SeqsubError):
    """A configured size or evaluation limit was exceeded."""


class RepeatViolation(ValidationError):
    """A sequence repeats an item under a no-repeat policy."""


class StageOutOfRange(ValidationError):
    """A sequence is longer than the number of stages an instance defines."""


class DegenerateInstance(ValidationError):
    """A quantity is undefined on the instance, e.g. curvature with f(t) = 0."""


class MalformedRecord(ValidationError):
    """A line of an input file could not be parsed."""


class EmptyResult(ValidationError):
    """Input parsed but nothing survived preprocessing."""


class BudgetExceeded(ResourceGuard):
    """A checker needed more oracle evaluations than its budget."""


class TooLarge(ResourceGuard):
    """An exhaustive enumeration would exceed its candidate guard."""

    def __init__(self, candidates, guard):
        super().__init__(f"{candidates} candidates exceed guard {guard}")
        self.candidates = candidates
        self.guard = guard


class OracleUnvalidated(ResourceGuard):
    """A fast OPT method was requested before its cross-check suite passed."""
