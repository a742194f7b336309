"""
Exception family shared by every wirehead-bench module
"""


class WireheadError(Exception):
    """Base class for all errors raised by this package"""


class UsageError(WireheadError, ValueError):
    """Invalid arguments, out-of-range indices or violated preconditions"""


class NumericalError(WireheadError, ArithmeticError):
    """A computation produced a non-finite value"""


class ResourceError(WireheadError, RuntimeError):
    """A configured node or action budget was exceeded"""


class FixtureError(UsageError):
    """
    Malformed fixture or config file

    Args:
        message: What is wrong
        field: Dotted path of the offending field (e.g. "transition.2.1")
        line: 1-based line number in the source file, if known
        source: File path the text came from
    """

    def __init__(self, message, field=None, line=None, source=None):
        self.message = message
        self.field = field
        self.line = line
        self.source = source
        super().__init__(self._format())

    def _format(self):
        where = []
        if self.source:
            where.append(str(self.source))
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field:
            where.append(f"field '{self.field}'")
        prefix = ', '.join(where)
        return f"{prefix}: {self.message}" if prefix else self.message
