"""Exception types shared across the package."""


class SchedNetError(Exception):
    """Base class for all package errors."""


class EnumerationCapExceeded(SchedNetError):
    pass


class DimensionMismatch(SchedNetError, ValueError):
    pass


class NegativeInput(SchedNetError, ValueError):
    pass


class EmptyVector(SchedNetError, ValueError):
    pass


class GridTooSmall(SchedNetError, ValueError):
    pass


class ReducibleChain(SchedNetError):
    pass


class PeriodicChain(SchedNetError):
    pass


class StateSpaceTooLarge(SchedNetError):
    pass


class NonPositiveMeasure(SchedNetError, ValueError):
    pass


class ReferenceNotFullSupport(SchedNetError, ValueError):
    pass


class ConfigInvalid(SchedNetError, ValueError):
    pass


class WindowOutOfRange(SchedNetError, ValueError):
    pass


class NoSnapshotNear(SchedNetError):
    pass


class Infeasible(SchedNetError):
    pass
