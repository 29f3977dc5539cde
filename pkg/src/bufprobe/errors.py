"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`BufprobeError`. The CLI maps :class:`ConfigurationError` and
:class:`CaptureFormatError` to exit code 2 and :class:`NoEstimateError` to
exit code 3.
"""


class BufprobeError(Exception):
    pass


class DomainError(BufprobeError, ValueError):
    """A numeric argument is outside the domain of the operation."""


class ConfigurationError(BufprobeError, ValueError):
    pass


class InconsistentCaptureError(BufprobeError, ValueError):
    """Two captures disagree on the packets they should share."""


class SimulationHorizonError(BufprobeError):
    """The output-rate profile ended before a packet finished service."""


class InvariantViolation(BufprobeError, AssertionError):
    pass


class CaptureFormatError(BufprobeError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class VersionError(CaptureFormatError):
    pass


class MonotonicityError(CaptureFormatError):
    pass


class NoEstimateError(BufprobeError):
    """The data does not contain what the estimator needs."""


class UnderflowError(NoEstimateError):
    """No drop epoch was observed, so no limit can be read off the data."""


class FillRateError(NoEstimateError, DomainError):
    """Input rate does not exceed output rate; the buffer never overflows."""


class PartialWindowError(NoEstimateError):
    pass


class ReorderingError(NoEstimateError):
    pass


class InsufficientDataError(NoEstimateError):
    pass
