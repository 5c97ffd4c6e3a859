"""Exception hierarchy shared by every stage of the pipeline."""


class TNDPCError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(TNDPCError, ValueError):
    """An argument is outside its documented domain."""


class DataError(TNDPCError, ValueError):
    """Input data is malformed (non-finite values, ragged CSV rows, ...)."""


class ContractError(TNDPCError, ValueError):
    """A precondition on a tensor-network object does not hold."""


class NumericalError(TNDPCError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""


class StageError(TNDPCError):
    """Wraps a failure inside :func:`tndpc.dpclus.cluster` with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
