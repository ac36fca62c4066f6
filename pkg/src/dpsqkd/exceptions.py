"""Exception types raised by the simulator."""


class ConfigurationError(ValueError):
    """An optical scheme or experiment configuration is malformed."""


class UndefinedInputError(ValueError):
    """A quantity is undefined for the given input (e.g. two zero vectors)."""


class EmptyStateError(ValueError):
    """A time-bin state carries no amplitude."""


class InsufficientDataError(ValueError):
    """Not enough samples or slots to compute a statistic."""


class InvalidStateError(ValueError):
    """A state violates the probability interpretation (norm > 1)."""


class MeasurementError(ValueError):
    """A detector reading is missing or out of its physical range."""


class OverlapError(ConfigurationError):
    """The reference pulse train would collide with the signal slots."""


class ProtocolDesyncError(RuntimeError):
    """Public announcements do not match the frames Alice prepared."""


class AnnouncementParseError(ValueError):
    """A line of the announcement stream could not be decoded."""

    def __init__(self, lineno, line, reason):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")
