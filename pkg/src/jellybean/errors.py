"""Exception hierarchy shared by all modules."""


class JellybeanError(Exception):
    """Base class for every error raised by this package."""


# simenv
class InvalidConfig(JellybeanError):
    pass


class InvalidParams(JellybeanError):
    pass


class NoViablePath(JellybeanError):
    pass


# fingerprint
class WindowTooLarge(JellybeanError):
    pass


class SeriesTooShort(JellybeanError):
    pass


class EmptyInput(JellybeanError):
    pass


class RunOverflow(JellybeanError):
    pass


class TruncationTooWide(JellybeanError):
    pass


class EmptyTrace(JellybeanError):
    """Raised when a trace has no valid samples to fingerprint."""


# keyagree
class LengthMismatch(JellybeanError):
    pass


class DecodeFailure(JellybeanError):
    pass


class FingerprintTooShort(JellybeanError):
    pass


class PairingAbort(JellybeanError):
    pass


# uph / adversary
class InvalidDwell(JellybeanError):
    pass


class InvalidArgs(JellybeanError):
    pass


class NothingObserved(JellybeanError):
    pass


# metrics
class EmptyComparison(JellybeanError):
    pass


class NoActivity(JellybeanError):
    pass


class SequenceTooShort(JellybeanError):
    pass


# cli / io
class UnknownParam(JellybeanError):
    pass


class TraceFormatError(JellybeanError):
    pass


class ConfigError(JellybeanError):
    pass
