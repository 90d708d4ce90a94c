"""Exception types raised across the package."""


class EmfError(Exception):
    """Base class for all package errors."""


class MalformedRecord(EmfError, ValueError):
    def __init__(self, line_number, reason):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


class OutOfBandFrequency(EmfError, ValueError):
    def __init__(self, line_number, frequency, band):
        self.line_number = line_number
        self.frequency = frequency
        super().__init__(
            f"line {line_number}: frequency {frequency!r} Hz outside band "
            f"[{band[0]!r}, {band[1]!r}] Hz"
        )


class EmptyTrace(EmfError, ValueError):
    pass


class TraceTooShort(EmfError, ValueError):
    pass


class EmptyWindow(EmfError, ValueError):
    pass


class LayoutBandMismatch(EmfError, ValueError):
    pass


class DimensionMismatch(EmfError, ValueError):
    pass


class NonFiniteInput(EmfError, ValueError):
    pass


class NotConverged(EmfError, RuntimeError):
    pass


class DuplicateLabel(EmfError):
    pass


class IoFailure(EmfError, OSError):
    pass


class CorruptProfile(EmfError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"{path}: {reason}")


class UnsupportedFormatVersion(EmfError):
    def __init__(self, path, version, supported):
        self.path = path
        self.version = version
        super().__init__(
            f"{path}: format_version {version} is newer than supported {supported}"
        )


class TooFewSamples(EmfError, ValueError):
    pass


class NoFeasibleThreshold(EmfError):
    pass


class DurationTooShort(EmfError, ValueError):
    pass
