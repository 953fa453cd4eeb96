"""Exception hierarchy shared by the solver, iteration, and command layers."""

from __future__ import annotations


class SwlabError(Exception):
    """Base class for all package errors."""


class GridMismatchError(SwlabError, ValueError):
    """Fields or partitions live on different grids."""


class PartitionRangeError(SwlabError, ValueError):
    """A block index lies outside the partition range."""


class BandLimitError(SwlabError, ValueError):
    """A field carries energy outside the admissible frequency band."""


class ConfigurationError(SwlabError, ValueError):
    """A run configuration is invalid or internally inconsistent."""


class CFLError(SwlabError, ValueError):
    """The time step violates the transport CFL bound."""


class SolverDivergence(SwlabError, RuntimeError):
    """A non-finite value appeared during time stepping.

    Attributes
    ----------
    last_state : object
        The last state whose values were all finite.
    step : int
        Index of the step that produced non-finite values.
    """

    def __init__(self, message: str, last_state=None, step: int = -1):
        super().__init__(message)
        self.last_state = last_state
        self.step = step


class VacuumProximityError(SwlabError, RuntimeError):
    """The normalized height ``1 + h`` dropped to the vacuum floor."""

    def __init__(self, message: str, min_height: float = float("nan"), report=None):
        super().__init__(message)
        self.min_height = min_height
        self.report = report


class GateViolation(SwlabError, RuntimeError):
    """A smallness gate failed while the height dropped below one half."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
