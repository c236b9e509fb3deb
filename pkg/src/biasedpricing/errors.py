"""Exception types raised across the package."""


class PricingError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PricingError, ValueError):
    """An argument lies outside the domain of the operation (e.g. q < 0)."""


class AssumptionViolation(PricingError):
    """A perception kernel does not have a mean linear in q."""


class NonmonotoneCutoffError(PricingError):
    """The cutoff-type map q -> theta_P(q) is not nondecreasing."""


class UnboundedDemandError(PricingError):
    """No finite consumption level balances marginal utility and perceived price."""


class UnboundedDomainError(PricingError):
    """The maximum quantity q*_P is infinite, so a functional cannot be integrated."""


class DegenerateSchemeError(PricingError):
    """The scheme produces no trade (q*_P = 0) where trade is required."""


class KinkError(PricingError):
    """An evaluation point sits on a kink where derivatives are undefined."""


class RegimeError(PricingError):
    """Block-tariff prices do not satisfy the ordering needed for the comparison."""


class HypothesisError(PricingError):
    """A hypothesis of a closed-form result fails.

    Attributes:
        hypothesis: the failed condition, written as an inequality.
    """

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        msg = f"hypothesis violated: {hypothesis}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class OracleDisagreementError(PricingError):
    """Two independent computations of the same quantity disagree."""


class ConvergenceFailure(PricingError):
    """Adjustment dynamics did not settle; carries the trajectory for inspection."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(PricingError, ValueError):
    """A configuration block is malformed; `where` names the field or line."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
