"""Exception hierarchy shared by the solver modules."""

from typing import Optional


class ImagTimeError(Exception):
    """Base class for every failure raised by the solver."""


class GridMismatchError(ImagTimeError, ValueError):
    """Two states live on different grids."""


class SingularSystemError(ImagTimeError):
    """Thomas elimination met a vanishing pivot."""

    def __init__(self, row: int, pivot: float):
        self.row = row
        self.pivot = pivot
        super().__init__(f"Singular tridiagonal system: pivot {pivot:.3e} at row {row}")


class StepFailureError(ImagTimeError):
    """A time step could not be completed; usually tau is too large."""


class NewtonConvergenceError(StepFailureError):
    def __init__(self, iterations: int, last_update: float):
        self.iterations = iterations
        self.last_update = last_update
        super().__init__(
            f"Newton iteration did not converge in {iterations} iterations "
            f"(last update {last_update:.3e}); try a smaller tau"
        )


class DegenerateStateError(ImagTimeError):
    """The state collapsed to (numerically) zero."""


class FlowAbortedError(ImagTimeError):
    """A flow run stopped on an error; the partial trace is attached."""

    def __init__(self, message: str, trace):
        self.trace = trace
        super().__init__(message)


class GroundStateNonConvergenceError(ImagTimeError):
    def __init__(self, last_residual: float, iterations: int):
        self.last_residual = last_residual
        self.iterations = iterations
        super().__init__(
            f"Ground state did not reach tolerance after {iterations} iterations "
            f"(last residual {last_residual:.3e})"
        )


class BlowUpError(ImagTimeError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(f"Non-finite state at t = {time:.6g}; reduce dt")


class OutOfChartError(ImagTimeError):
    """The (r, u) parametrization of the unit sphere does not reach this u."""


class NotInSubspaceError(ImagTimeError):
    """A vector expected in W is not orthogonal to the ground state."""


class EigenSolverError(ImagTimeError):
    pass


class InsufficientDataError(ImagTimeError):
    pass


class ReportWriteError(ImagTimeError):
    def __init__(self, path: str, cause: Optional[Exception] = None):
        self.path = path
        super().__init__(f"Failed to write CSV report to {path}: {cause}")
