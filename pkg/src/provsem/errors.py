"""Exception hierarchy shared across the toolkit."""


class ProvsemError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ProvsemError):
    """Invalid or unreadable configuration."""


class ParseError(ProvsemError):
    """A trace line that cannot be turned into a valid event.

    Carries the 1-based line number (0 when unknown) and the offending
    field name so callers can report precisely where a trace is broken.
    """

    def __init__(self, message, lineno=0, field=""):
        super().__init__(message)
        self.lineno = lineno
        self.field = field

    def __str__(self):
        prefix = "line %d: " % self.lineno if self.lineno else ""
        where = "field '%s': " % self.field if self.field else ""
        return prefix + where + super().__str__()


class DataError(ProvsemError):
    """Input data that violates an operation's preconditions."""


class ModelFormatError(ProvsemError):
    """A model file that is corrupt, truncated, or of the wrong version."""


class UncalibratedModelError(ProvsemError):
    """A decision was requested from a model with no calibrated threshold."""


class TrainingDivergedError(ProvsemError):
    """Training produced a non-finite loss; usually the learning rate is too high."""
