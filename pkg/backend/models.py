from pydantic import BaseModel


class Verdict(BaseModel):
    """Outcome of one structural test"""

    name: str  # Which test produced it (e.g. "sfl", "relative goursat", "admissibility")
    holds: bool  # Whether the tested property holds
    signature: str | None = None  # Decel signature, e.g. "<0,1,1>"
    refined_type: list[list[int]] | None = None  # [[m_j, chi^j_(j-1), chi^j], ...]
    velocity: str | None = None  # Vel signature of the derived flag
    failures: list[str] = []  # Names of failed conditions
    conditions: dict[str, bool] = {}  # Every checked condition and its result


class PlanRecord(BaseModel):
    """Prolongation plan of a cascade run"""

    mode: str  # "exact" or "bound"
    base: dict[str, int]  # Reduced variable -> jet order before prolonging
    orders: dict[str, int]  # Reduced variable -> jet order after prolonging
    nu: str  # Signature of the reduced variables
    nu_prime: str  # Signature after prolonging
    kappa_bar: str  # Signature of the reduced system
    k_bar: int  # Derived length of the reduced system
    expected_signature: str  # kappa_bar + nu'
    joined: str | None = None  # Join of the fundamental function f-jet signatures
    refined: bool = False  # Whether the bound plan was tightened
    dimensions_ok: bool = True  # dim J^kappa' = N_(nu' - nu) + dim (J^kappa x G)


class SplitRecord(BaseModel):
    """One attempted partial contact curve reduction"""

    split: list[str]  # Variables frozen to arbitrary functions
    is_sfl: bool  # Whether the reduction is static feedback linearizable
    reason: str | None = None  # Failed conditions or error condition


class LocusRecord(BaseModel):
    """A denominator excluded from the region where the results hold"""

    expr: str  # Printed denominator
    origin: str  # Computation that divided by it


class Report(BaseModel):
    """Everything one toolkit run computed"""

    schema_version: str  # Report layout version
    task: str  # Verb that produced the report
    system: str  # System name from the input file
    seed: int  # Probe seed; reruns with it reproduce every number
    verdicts: list[Verdict] = []  # Structural tests in the order they ran
    signatures: dict[str, str] = {}  # Named signatures (kappa, kappa_bar, nu', ...)
    transformations: dict[str, dict[str, str]] = {}  # Map name -> component -> expression
    systems: dict[str, dict[str, str]] = {}  # Derived control systems as x' -> expression
    compensator: dict[str, str] | None = None  # Original control -> beta(t, x, y, W)
    flat_outputs: list[str] = []  # Fundamental functions of the augmented system
    solution: dict[str, str] | None = None  # Variable -> expression in arbitrary-function jets
    plan: PlanRecord | None = None  # Prolongation plan of a cascade run
    splits: list[SplitRecord] = []  # Reductions tried, in order
    loci: list[LocusRecord] = []  # Genericity loci met during the run
    notes: list[str] = []  # Non-fatal remarks (fallbacks, unavailable steps)
    error: str | None = None  # Message of the error that stopped the run
    condition: str | None = None  # Condition named by that error
    elapsed: float = 0.0  # Wall-clock seconds

    def verdict(self, name: str) -> Verdict | None:
        return next((v for v in self.verdicts if v.name == name), None)


class FixtureResult(BaseModel):
    """Outcome of one corpus fixture"""

    name: str  # Fixture name
    passed: bool  # Whether every expected value matched
    mismatches: list[str] = []  # Human-readable differences
    elapsed: float = 0.0  # Wall-clock seconds
    error: str | None = None  # Error that stopped the fixture, if any
    condition: str | None = None  # Condition of that error or of an inconclusive comparison
