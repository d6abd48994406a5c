"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses without inspecting messages.
"""


class VolCopulaError(Exception):
    exit_code = 2


class ValidationError(VolCopulaError):
    """Bad configuration or arguments."""

    exit_code = 1


class DataError(VolCopulaError):
    """Input data cannot support the requested computation."""

    exit_code = 2


class NumericalError(VolCopulaError):
    """A numerical routine failed to reach its tolerance."""

    exit_code = 3


class EmptyInput(DataError):
    pass


class MalformedSession(ValidationError):
    pass


class NoCommonDays(DataError):
    pass


class DegenerateSeries(DataError):
    pass


class LengthMismatch(DataError):
    pass


class BinningMismatch(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class ModeInvalid(ValidationError):
    pass


class NoRetainedPoints(DataError):
    pass


class OutOfRange(ValidationError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class BracketNotFound(NumericalError):
    pass


class MissingFile(DataError):
    pass


class ParseError(DataError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class ConfigError(ValidationError):
    pass
