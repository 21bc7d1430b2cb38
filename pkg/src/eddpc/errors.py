"""Exception hierarchy shared by every stage of the pipeline."""


class EDDPCError(Exception):
    """Base class for all package errors."""


class ParseError(EDDPCError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DimensionError(EDDPCError, ValueError):
    pass


class PreconditionError(EDDPCError, ValueError):
    pass


class RankConditionError(EDDPCError):
    """Data matrices do not satisfy the rank condition rank([U; X0]) = n + m."""


class NotPositiveDefiniteError(EDDPCError):
    pass


class StabilityError(EDDPCError):
    pass


class ConvergenceError(EDDPCError):
    pass


class LPCyclingError(EDDPCError):
    pass


class EnumerationBudgetError(EDDPCError):
    pass


class SimulationError(EDDPCError):
    pass


class PipelineError(EDDPCError):
    """An error raised inside one named stage of the controller build."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
