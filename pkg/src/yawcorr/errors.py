"""Exception hierarchy shared by every module."""


class YawCorrError(Exception):
    """Base class for all yawcorr errors."""


class InvalidInputError(YawCorrError, ValueError):
    pass


class SchemaError(YawCorrError):
    pass


class ParseError(YawCorrError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class OrderingError(YawCorrError, ValueError):
    pass


class InsufficientDataError(YawCorrError):
    pass


class OutOfRangeError(YawCorrError, ValueError):
    pass


class FitError(YawCorrError):
    """A fit failed to converge or the problem is not identifiable."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UndefinedMetricError(YawCorrError, ValueError):
    pass
