"""Exception hierarchy.  Every computational failure names its module."""


class BridgeGapError(Exception):
    module = "bridgegap"


class DomainError(BridgeGapError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class PrecisionError(BridgeGapError, ValueError):
    """Working precision too low for the requested computation."""

    module = "precision"


class ConvergenceError(BridgeGapError, ArithmeticError):
    """A series, product or search did not reach its tolerance within its cap.

    ``bound`` names the truncation rule or limit that was exceeded.
    """

    def __init__(self, message: str, *, module: str, bound: str, **info):
        super().__init__(message)
        self.module = module
        self.bound = bound
        self.info = info


class SlowConvergenceError(ConvergenceError):
    """The excursion-maximum series would need more terms than allowed."""

    def __init__(self, x, cap, message: str | None = None):
        super().__init__(
            message or f"F3 series at x={x} cannot reach tolerance within {cap} terms",
            module="specfun",
            bound="F3 tail bound 2exp(-(n+1)x^2)/(1-exp(-x^2))",
            x=x,
            cap=cap,
        )
        self.x = x
        self.cap = cap
