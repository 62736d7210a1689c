"""Exception types raised across the package."""


class RewritableError(Exception):
    """Base class for all package errors."""


class InvalidParams(RewritableError, ValueError):
    pass


class MaxWritesExceeded(RewritableError):
    """A cell did not reach its target region within the write cap.

    ``cells`` holds the indices (trial ids when raised from the harness) of
    the offending cells, if known.
    """

    def __init__(self, message, cells=None):
        super().__init__(message)
        self.cells = [] if cells is None else list(cells)


class OutOfSupport(RewritableError, ValueError):
    """An output value lies outside every target region of a layout."""


class NoRootBracket(RewritableError, ArithmeticError):
    pass


class Infeasible(RewritableError):
    """No scheme parameters satisfy the write-cost constraint."""


class BelowThreshold(RewritableError, ValueError):
    pass


class ConfigError(RewritableError, ValueError):
    def __init__(self, message, field=None, line=None):
        loc = []
        if field is not None:
            loc.append(f"field '{field}'")
        if line is not None:
            loc.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.field = field
        self.line = line
