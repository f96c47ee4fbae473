"""Exception and warning hierarchy.

Two families matter to callers:

* :class:`ValidationError` -- bad input (kernel violates its assumptions,
  malformed config, mismatched grids).  The CLI maps these to exit code 2.
* :class:`NumericalError` -- a numerical contract broke while computing
  (quadrature did not converge, positivity lost, velocity out of range).
  The CLI maps these to exit code 3.
"""


class NlclError(Exception):
    """Base class for all package errors."""


class ValidationError(NlclError):
    pass


class NumericalError(NlclError):
    pass


# -- validation ---------------------------------------------------------------

class AssumptionViolation(ValidationError):
    """A kernel fails one of its admissibility assumptions (named by ``assumption``)."""

    def __init__(self, assumption, detail):
        self.assumption = assumption
        self.detail = detail
        super().__init__(f"kernel assumption {assumption!r} violated: {detail}")


class NonContiguousPieces(ValidationError):
    pass


class EtaOutOfRange(ValidationError):
    pass


class NegativeDatum(ValidationError):
    pass


class UnboundedDatum(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class InvalidVelocity(ValidationError):
    pass


class UnsupportedFlux(ValidationError):
    pass


class OutOfRangeState(ValidationError):
    pass


class SupportNotCovered(ValidationError):
    pass


class TrajectoryTooShort(ValidationError):
    pass


class MissingSnapshot(ValidationError):
    pass


class ConfigError(ValidationError):
    """Config parsing problem, tagged with the offending key and line."""

    def __init__(self, key, line, detail):
        self.key = key
        self.line = line
        self.detail = detail
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{type(self).__name__}: {key}{where}: {detail}")


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class RangeError(TypeMismatch):
    pass


class MissingRequired(ConfigError):
    pass


# -- numerical ------------------------------------------------------------

class QuadratureFailure(NumericalError):
    pass


class DegenerateIntegral(NumericalError):
    pass


class DegenerateRatio(NumericalError):
    pass


class VelocityRangeExceeded(NumericalError):
    pass


class PositivityLoss(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


# -- warnings -------------------------------------------------------------

class GridTooCoarse(UserWarning):
    """Kernel narrower than one cell; all mass was put in the first weight."""


class BoundaryContamination(UserWarning):
    """Boundary cells drifted from their initial values during a run."""
