"""Exception hierarchy.

Every error raised on bad data derives from :class:`EbenError`, which the
CLI maps to exit code 2.
"""


class EbenError(Exception):
    """Base class for all toolkit errors."""


class InvalidParamsError(EbenError, ValueError):
    pass


# audio-io
class NotMonoError(EbenError):
    pass


class UnsupportedEncodingError(EbenError):
    pass


class MalformedHeaderError(EbenError):
    pass


class IoFailureError(EbenError, OSError):
    pass


class AllZeroSignalError(EbenError, ValueError):
    pass


class EmptyBufferError(EbenError, ValueError):
    pass


class LengthMismatchError(EbenError, ValueError):
    pass


# pqmf
class NoConvergenceError(EbenError, RuntimeError):
    pass


class BankMismatchError(EbenError, ValueError):
    pass


class CountOutOfRangeError(EbenError, ValueError):
    pass


# degrade
class BufferTooShortError(EbenError, ValueError):
    pass


class InvalidSpecError(EbenError, ValueError):
    pass


# sysid
class SegmentOutOfRangeError(EbenError, IndexError):
    pass


class TooFewSegmentsError(EbenError, ValueError):
    pass


# neural
class InvalidQError(EbenError, ValueError):
    pass


class KernelStrideMismatchError(EbenError, ValueError):
    pass


class BandCountOrderError(EbenError, ValueError):
    pass


class WeightShapeMismatchError(EbenError, ValueError):
    pass


class LengthOverflowError(EbenError, ValueError):
    pass


class BadMagicError(EbenError, ValueError):
    pass


class ShapeMismatchOnLoadError(EbenError, ValueError):
    pass


class TruncatedPayloadError(EbenError, ValueError):
    pass


# losses / metrics
class ShapeMismatchError(EbenError, ValueError):
    pass


class ZeroReferenceError(EbenError, ValueError):
    pass
