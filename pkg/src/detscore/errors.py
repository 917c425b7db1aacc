"""Exception types shared across the toolkit."""


class DetscoreError(Exception):
    """Base class for all toolkit data and usage errors."""


class OverlapError(DetscoreError):
    """Two score objects both provide a score for the same trial."""


class EmptySelection(DetscoreError):
    """A filtering operation left no trials."""


class FormatError(DetscoreError):
    """Malformed binary score/key data (bad magic, version, kind or truncation)."""


class InvalidCellValue(FormatError):
    """A cell byte is outside the allowed set for the file kind."""


class ParseError(DetscoreError):
    """Malformed text score/key line."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DuplicateTrial(ParseError):
    """The same (model, segment) pair appears twice in a text file."""


class EmptyInput(DetscoreError):
    """An operation that needs at least one element received none."""


class DegenerateInput(DetscoreError):
    """An operation needs both target and non-target scores."""


class AlignmentError(DetscoreError):
    """Subsystem score stacks do not share a common trial list."""


class DimensionMismatch(DetscoreError):
    """Model shape does not match the data it is applied to."""


class OracleFailure(DetscoreError):
    """An objective callback returned a non-finite value, gradient or product."""


class NoProgressWarning(UserWarning):
    """The optimizer hit its iteration cap before reaching the gradient tolerance."""
