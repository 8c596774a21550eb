"""Exception types raised across the toolkit."""


class TsError(Exception):
    """Base class for every error raised by dvbts."""


# packet layer
class SyncByteMismatch(TsError):
    pass


class MalformedAdaptation(TsError):
    pass


class NeedMoreData(TsError):
    pass


class NoSyncFound(TsError):
    pass


# sections
class PsiError(TsError):
    pass


class WrongTableId(PsiError):
    pass


class BodyLengthNotMultipleOf4(PsiError):
    pass


class DescriptorLoopOverrun(PsiError):
    pass


class InvalidSectionCrc(PsiError):
    pass


class TruncatedSection(UserWarning):
    """Stream ended while a section was still being assembled."""


# analysis
class InsufficientPcrs(TsError):
    pass


class NonMonotonicPcr(TsError):
    pass


# generation / injection
class SpecError(TsError, ValueError):
    pass


class SpecOverCapacity(SpecError):
    pass


class SpecPidCollision(SpecError):
    pass


class IndexOutOfRange(TsError, IndexError):
    pass


class InjectionError(TsError, ValueError):
    """Error target does not satisfy the preconditions of its kind."""


# i/o
class SourceUnavailable(TsError, OSError):
    pass


class SinkWriteFailure(TsError, OSError):
    pass


class UnknownPid(UserWarning):
    """A selected PID never appeared in the stream."""
