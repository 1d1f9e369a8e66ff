"""Exception types raised across the package."""


class SpcRadarError(Exception):
    """Base class for all package errors."""


class InvalidScenario(SpcRadarError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(str(v) for v in self.violations) or "invalid scenario"
        super().__init__(msg)


class BreakpointBandExceedsRate(SpcRadarError, ValueError):
    pass


class EmptyFrame(SpcRadarError, ValueError):
    pass


class BandEmpty(SpcRadarError, ValueError):
    pass


class InsufficientPoints(SpcRadarError, ValueError):
    pass


class DegenerateConic(SpcRadarError, ValueError):
    pass


class LowSNRForCalibration(SpcRadarError, ValueError):
    pass


class SingularTransform(SpcRadarError, ValueError):
    pass


class TooFewChirps(SpcRadarError, ValueError):
    pass


class AxisMismatch(SpcRadarError, ValueError):
    pass


class PeakNotFound(SpcRadarError, LookupError):
    pass


class FrameFormatError(SpcRadarError, ValueError):
    pass
