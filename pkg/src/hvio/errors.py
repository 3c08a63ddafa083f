"""Exception types shared across the package."""


class HvioError(Exception):
    """Base class for all domain errors raised by this package."""


# geometry
class DegenerateGeometry(HvioError):
    pass


class CheiralityAmbiguous(HvioError):
    pass


class LowParallax(HvioError):
    pass


# imaging
class TooSmall(HvioError):
    pass


class OutOfBounds(HvioError):
    pass


class PatchOutOfBounds(HvioError):
    pass


# imu
class EmptyInterval(HvioError):
    pass


class GapTooLarge(HvioError):
    pass


# direct alignment
class TooFewPoints(HvioError):
    pass


class IllConditioned(HvioError):
    pass


# tracking
class InitFailed(HvioError):
    pass


class TrackingLost(HvioError):
    pass


class RecoveryFailed(HvioError):
    pass


class EmptyDataset(HvioError):
    pass


# dataset
class MissingFile(HvioError):
    pass


class MalformedCsv(HvioError):
    pass


class NonMonotoneTimestamps(HvioError):
    pass


class ConfigInvalid(HvioError):
    pass


# metrics
class NoOverlap(HvioError):
    pass


class DeltaTooLarge(HvioError):
    pass


class DegenerateAlignment(HvioError):
    pass
