"""Exception types shared across the package."""


class WdroError(Exception):
    """Base class for all package errors."""


class ParseError(WdroError, ValueError):
    """Malformed input file. ``line`` / ``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class TaskError(WdroError, ValueError):
    """Operation does not apply to the dataset's task (classification/regression)."""


class DomainError(WdroError, ValueError):
    """A numerical argument lies outside the domain where a quantity is finite."""


class UnsupportedError(WdroError, NotImplementedError):
    """The requested combination of model and operation is not implemented."""


class BudgetError(WdroError, ValueError):
    """Coreset budget is too small for the grid it must cover."""

    def __init__(self, message, minimum=None):
        self.minimum = minimum
        super().__init__(message)
