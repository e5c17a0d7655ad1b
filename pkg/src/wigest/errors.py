"""Exception hierarchy shared by every stage of the pipeline."""


class WigestError(Exception):
    """Base class for all errors raised by this package."""


class TraceFormatError(WigestError):
    """Raised when a trace file cannot be parsed."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MalformedLine(TraceFormatError):
    pass


class NonMonotonicTimestamp(TraceFormatError):
    pass


class SubcarrierCountMismatch(TraceFormatError):
    pass


class MissingMeta(TraceFormatError):
    pass


class EmptyTrace(WigestError):
    pass


class TooFewPoints(WigestError):
    pass


class GapTooLarge(WigestError):
    def __init__(self, start_us, len_us):
        self.start_us = int(start_us)
        self.len_us = int(len_us)
        super().__init__(f"gap of {self.len_us} us starting at t={self.start_us} us")


class SignalTooShort(WigestError):
    pass


class InsufficientQuietSignal(WigestError):
    pass


class TooFewPeaks(WigestError):
    pass


class OutOfOrderEvent(WigestError):
    pass


class ZeroDuration(WigestError):
    pass


class MissingLabels(WigestError):
    pass


class ConfigError(WigestError, ValueError):
    """Invalid configuration value (bad kind, range, or flag)."""
