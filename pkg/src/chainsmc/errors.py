"""Exception types shared across the package.

Every error raised by the public API derives from ChainSmcError, so callers
(including the CLI) can map failures to outcomes without matching on message
text.
"""

from __future__ import annotations


class ChainSmcError(Exception):
    """Base class for all package-specific errors."""


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

class ExprTypeError(ChainSmcError):
    """An expression mixes boolean and numeric operands illegally."""


class UnboundNameError(ChainSmcError):
    """An expression references a name absent from the environment."""

    def __init__(self, name: str):
        super().__init__(f"unbound name: {name!r}")
        self.name = name


class DivisionByZeroError(ChainSmcError):
    """Division with a zero denominator during expression evaluation."""


# ---------------------------------------------------------------------------
# Model construction and execution
# ---------------------------------------------------------------------------

class ModelValidationError(ChainSmcError):
    """A compound model failed structural validation.

    Carries the full list of issues so callers can report all problems at
    once instead of fixing them one at a time.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(f"[{i.kind}] {i.where}: {i.message}" for i in self.issues)
        super().__init__(f"model validation failed: {lines}")


class StepLimitExceededError(ChainSmcError):
    """A simulation exceeded its step cap before reaching the horizon."""

    def __init__(self, limit: int, time: float):
        super().__init__(f"step limit {limit} exceeded at model time {time}")
        self.limit = limit
        self.time = time


# ---------------------------------------------------------------------------
# Distributions and datasets
# ---------------------------------------------------------------------------

class BadParameterError(ChainSmcError):
    """A parameter is outside its documented domain."""


class EmptySupportError(ChainSmcError):
    """A distribution has nothing to draw from."""


class DatasetError(ChainSmcError):
    """Base class for dataset loading problems."""


class DatasetParseError(DatasetError):
    """A dataset row is malformed.  Carries the 1-based row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NegativeValueError(DatasetError):
    """A dataset row holds a negative duration.  Carries the row number."""

    def __init__(self, row: int, value: float):
        super().__init__(f"row {row}: negative value {value}")
        self.row = row
        self.value = value


class EmptyFileError(DatasetError):
    """A dataset file contains no data rows."""


# ---------------------------------------------------------------------------
# Property language
# ---------------------------------------------------------------------------

class FormulaSyntaxError(ChainSmcError):
    """A property string failed to parse.  Carries the offset of the error."""

    def __init__(self, position: int, message: str):
        super().__init__(f"at offset {position}: {message}")
        self.position = position


class BadIntervalError(ChainSmcError):
    """A temporal operator has a malformed interval (a > b or negative)."""


class UnknownVariableError(ChainSmcError):
    """A formula references a variable the trace does not record."""

    def __init__(self, name: str):
        super().__init__(f"trace does not record variable {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# Statistical checking
# ---------------------------------------------------------------------------

class InconclusiveTraceError(ChainSmcError):
    """A trace was too short to decide the property being estimated."""
