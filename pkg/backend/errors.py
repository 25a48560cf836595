"""Error hierarchy for the toolkit.

Every error carries a ``condition`` naming the check that failed, so reports can surface it
verbatim. Negative verdicts are returned as values; these exceptions mark broken preconditions
and failed verifications.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors"""

    condition = "toolkit error"

    def __init__(self, message: str = "", condition: str | None = None):
        super().__init__(message or self.condition)
        if condition is not None:
            self.condition = condition


# exprcore
class DivisionByZeroExpr(ToolkitError):
    condition = "denominator normalizes to zero"


class Inconclusive(ToolkitError):
    condition = "normal form and probe evaluation disagree"


class PoleAtPoint(ToolkitError):
    condition = "evaluation point hits a pole"


# geometry / linalg
class ChartMismatch(ToolkitError):
    condition = "objects live on different charts"


class RankDisagreement(ToolkitError):
    condition = "symbolic and numeric ranks differ"


class LinearSolveFailure(ToolkitError):
    condition = "linear system has no solution over the coefficient field"


class NotInvertible(ToolkitError):
    condition = "coordinate map could not be inverted"


class IrregularSystem(ToolkitError):
    condition = "control Jacobian does not have full rank"


# flags / goursat
class NotBracketStabilizing(ToolkitError):
    condition = "derived flag exceeds the chart dimension"


class DeltaKGreaterThanOne(ToolkitError):
    condition = "delta_k > 1 outside the equal-order case; try a partial prolongation"


class NotStronglyTransverse(ToolkitError):
    condition = "symmetry algebra meets the first derived bundle"


class NotStaticFeedbackLinearizable(ToolkitError):
    condition = "system is not static feedback linearizable"


# contact
class ZTauNotOne(ToolkitError):
    condition = "Z(tau) is not identically one"


class NotIntegrable(ToolkitError):
    condition = "distribution is not bracket closed"


class IntegralSearchExhausted(ToolkitError):
    condition = "first integral search exhausted"

    def __init__(self, message: str = "", partial: list | None = None):
        super().__init__(message)
        self.partial = partial or []


class VerificationFailed(ToolkitError):
    condition = "pushforward does not match the normal form"


# symmetry
class NotExpressibleInInvariants(ToolkitError):
    condition = "quotient drift is not a function of the invariants"


class NormalFormViolation(ToolkitError):
    condition = "connection coefficients depend on group coordinates"


# cascade
class ReductionNotSFL(ToolkitError):
    condition = "no partial contact curve reduction is static feedback linearizable"


class ProlongationInsufficient(ToolkitError):
    condition = "prolonged sub-connection is not static feedback linearizable"


class CompensatorSolveFailed(ToolkitError):
    condition = "could not solve for the controls in the compensator relations"


class InversionFailed(ToolkitError):
    condition = "contact transformation could not be inverted for an explicit solution"


# cli
class ParseError(ToolkitError):
    condition = "system file does not parse"

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
