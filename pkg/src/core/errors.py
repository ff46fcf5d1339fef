"""Exception hierarchy.

Each error carries the process exit code the CLI reports for it.
"""


class RandsurfError(Exception):
    """Base error for the lab."""

    exit_code = 1


class ValidationError(RandsurfError):
    """Input violates a precondition."""

    exit_code = 2


class NumericalError(RandsurfError):
    """A numerical procedure failed to converge or produced non-finite output."""

    exit_code = 3


class ConfigError(ValidationError):
    """Malformed run configuration."""


class UnsupportedCaseError(ValidationError):
    """Requested case is outside the implemented set."""


class BranchCutError(ValidationError):
    """Evaluation on a branch cut without a side selector."""


class ThetaConvergenceError(NumericalError):
    """Theta series did not reach tolerance within the term cap."""


class SeriesError(NumericalError):
    """Series reversion or extrapolation failed."""


class HalfEdgeBudgetError(ValidationError):
    """Wick enumeration requested beyond the half-edge budget."""


class EnsembleError(ValidationError):
    """Invalid ensemble configuration."""


class UnstableActionError(NumericalError):
    """Monte Carlo action drifted towards minus infinity."""


class PottsError(NumericalError):
    """Spectral curve construction failed."""


class NewtonDivergenceError(PottsError):
    """Newton or least-squares iteration diverged."""


class DslError(ValidationError):
    """Invalid operator algebra request."""


class WronskianError(ValidationError):
    """Invalid Young diagram or Wronskian request."""
