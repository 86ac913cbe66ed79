"""Exception types shared across the package."""


class EqfError(Exception):
    """Base class for all package-specific errors."""


class SpecMismatchError(EqfError):
    """Operands belong to different groups or have incompatible dimensions."""


class InvalidElementError(EqfError):
    """Matrix violates the group's defining constraints beyond tolerance."""


class NotInAlgebraError(EqfError):
    """Matrix does not lie in the span of the algebra basis."""


class CutLocusError(EqfError):
    """Logarithm requested at or beyond the injectivity radius."""


class ProjectionFailedError(EqfError):
    """Input too degenerate to project back onto the group."""


class MissingActionError(EqfError):
    """Operation requires a declared input action and none is present."""


class MissingDerivativeError(EqfError):
    """Analytic linearisation requested but no analytic derivative declared."""


class NotInvariantError(EqfError):
    """System is not invariant; carries the worst offending input direction."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotGroupAffineError(EqfError):
    """Operation requires a group-affine system and the check failed."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class RankInstabilityError(EqfError):
    """Sampled rank changed between half and full sample count."""


class NumericBlowupError(EqfError):
    """Non-finite values encountered during integration."""


class UnknownSystemError(EqfError):
    """Registry lookup with an unknown identifier."""


class ScenarioError(EqfError):
    """Malformed or inconsistent scenario configuration."""
