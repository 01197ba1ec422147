"""Exception hierarchy shared by all pipeline stages."""


class BrpdError(Exception):
    """Base class for every error raised by this package."""


class EdfError(BrpdError):
    pass


class EdfHeaderError(EdfError):
    """Malformed EDF header; ``offset`` is the byte offset of the bad field."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class EdfTruncationError(EdfError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(
            f"EDF header declares {expected} data records but the file holds {found}"
        )


class EdfCalibrationError(EdfError):
    pass


class ChannelError(BrpdError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SegmentError(BrpdError, ValueError):
    pass


class FilterDesignError(BrpdError, ValueError):
    pass


class SignalLengthError(BrpdError, ValueError):
    pass


class WhiteningError(BrpdError, ValueError):
    pass


class SpectralRangeError(BrpdError, ValueError):
    pass


class ResolutionError(BrpdError, ValueError):
    pass


class DpssParameterError(BrpdError, ValueError):
    pass


class DegenerateInputError(BrpdError, ValueError):
    pass


class DesignError(BrpdError, ValueError):
    """Incomplete or malformed statistical design."""


class SynthSpecError(BrpdError, ValueError):
    pass


class ConfigError(BrpdError, ValueError):
    pass
