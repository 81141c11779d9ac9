"""Exception hierarchy shared by every module."""


class SpinLedgerError(Exception):
    """Base class for all package errors."""


class ConfigError(SpinLedgerError, ValueError):
    pass


class LabelCollision(SpinLedgerError, ValueError):
    pass


class SpaceMismatch(SpinLedgerError, ValueError):
    pass


class UnknownFactor(SpinLedgerError, KeyError):
    pass


class NotSelfAdjoint(SpinLedgerError, ValueError):
    pass


class DegenerateAxis(SpinLedgerError, ValueError):
    pass


class NotPure(SpinLedgerError, ValueError):
    pass


class ReservoirParity(ConfigError):
    pass


class CalibrationError(SpinLedgerError, ValueError):
    pass


class DeviceNotReady(SpinLedgerError, RuntimeError):
    pass


class InvariantViolation(SpinLedgerError, AssertionError):
    """An internal numerical invariant failed; indicates a bug, not bad input."""
