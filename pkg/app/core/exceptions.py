"""Exception hierarchy for the lab.

Services raise these; only the command router turns them into exit codes.
"""

from typing import Any, Dict, List, Optional


class LabError(Exception):
    """Root of every error raised by the lab"""

    exit_code = 1


class ConfigurationError(LabError):
    """Invalid input or configuration (exit code 2)"""

    exit_code = 2


class NumericalError(LabError):
    """A computation could not be completed (exit code 3)"""

    exit_code = 3

    def __init__(self, message: str, partial: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.partial = partial or {}


class DimensionMismatchError(ConfigurationError):
    pass


class DegreeError(ConfigurationError):
    pass


class DomainMismatchError(ConfigurationError):
    pass


class SupportError(ConfigurationError):
    pass


class NonUnitaryError(ConfigurationError):
    pass


class ParameterRangeError(ConfigurationError, ValueError):
    """A physical or numerical parameter lies outside its admissible range"""


class UnderResolvedError(ConfigurationError):
    """The lattice spacing does not resolve the requested scale"""


class NoBubbleError(NumericalError):
    pass


class FlowDivergenceError(NumericalError):
    """Energy failed to decrease after the maximal number of backtracks"""

    def __init__(self, message: str, log: List[Dict[str, Any]]):
        super().__init__(message, partial={"log": log})
        self.log = log


class SolverConvergenceError(NumericalError):
    def __init__(self, message: str, residuals: List[float]):
        super().__init__(message, partial={"residuals": residuals})
        self.residuals = residuals


class SylvesterMismatchError(NumericalError):
    def __init__(self, message: str, diff: List[Dict[str, Any]]):
        super().__init__(message, partial={"diff": diff})
        self.diff = diff
