"""Exception hierarchy shared by all jetcast modules."""


class JetcastError(Exception):
    """Base class for every error raised deliberately by jetcast."""


# -- data -------------------------------------------------------------------

class DataError(JetcastError, ValueError):
    """Input data is unusable."""


class DataNotFound(DataError, FileNotFoundError):
    pass


class LineError(DataError):
    """A CSV problem tied to a specific 1-based line number (header is line 1)."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MalformedRow(LineError):
    pass


class NonMonotonicTimestamp(LineError):
    pass


class CadenceGap(LineError):
    pass


class SchemaMismatch(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class EmptySplit(DataError):
    pass


# -- neural core -------------------------------------------------------------

class ShapeMismatch(JetcastError, ValueError):
    pass


class NonFiniteError(JetcastError, FloatingPointError):
    """NaN or Inf reached a layer boundary."""


class IndexOutOfRange(JetcastError, IndexError):
    pass


# -- pipeline / metrics ------------------------------------------------------

class RowCountMismatch(JetcastError, ValueError):
    pass


class BottleneckTooWide(JetcastError, ValueError):
    pass


class LengthMismatch(JetcastError, ValueError):
    pass


class EmptySeries(JetcastError, ValueError):
    pass


class EmptyList(JetcastError, ValueError):
    pass


# -- persistence / config ----------------------------------------------------

class LoadError(JetcastError):
    """A persisted model container could not be read back."""


class ConfigError(JetcastError, ValueError):
    pass
