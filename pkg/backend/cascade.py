"""Cascade feedback linearization of a contact sub-connection.

Freeze some jet variables to the jets of arbitrary functions of t, check that what is left is
static feedback linearizable, read off how far the frozen variables must be prolonged, prolong,
and turn the prolongation into a dynamic compensator for the original system.
"""

import logging
from dataclasses import dataclass, field
from functools import reduce as fold
from itertools import combinations

import sympy as sp

from config import config
from contact import ContactTransformation, contact_coordinates
from errors import (
    CompensatorSolveFailed,
    Inconclusive,
    IntegralSearchExhausted,
    InversionFailed,
    NotInvertible,
    ProlongationInsufficient,
    ToolkitError,
    VerificationFailed,
)
from exprcore import is_zero, jet_order, normalize
from flags import Signature
from geometry import ControlSystem, invert
from goursat import GoursatVerdict, jet_name, sfl_test
from symmetry import SubConnection, build_subconnection

logger = logging.getLogger(__name__)


def function_names(count: int) -> list[str]:
    return ["f"] if count == 1 else [f"f{i + 1}" for i in range(count)]


def function_jet(F, order: int, t: sp.Symbol) -> sp.Expr:
    return F(t) if order == 0 else sp.Derivative(F(t), (t, order))


@dataclass
class Reduction:
    """Partial contact curve reduction of a sub-connection along the nu variables"""

    subconnection: SubConnection
    split: list[str]  # nu variables
    functions: dict[str, sp.Function]  # nu variable -> arbitrary function of t
    orders: dict[str, int]  # nu variable -> jet order in J^kappa
    substitution: dict[sp.Symbol, sp.Expr]
    system: ControlSystem  # the reduced sub-connection on J^(nu perp) x G

    @property
    def nu(self) -> Signature:
        return Signature.from_orders(self.orders.values())

    @property
    def nu_perp(self) -> Signature:
        jets = self.subconnection.brunovsky.jets
        return Signature.from_orders(
            len(chain) - 1 for name, chain in jets.items() if name not in self.orders
        )


def reduce(H: SubConnection, split: list[str], names: list[str] | None = None) -> Reduction:
    """Substitute the jets of the split variables by f^(s)(t).

    Args:
        H: the contact sub-connection
        split: jet variables to freeze, the rest stays as controls
        names: arbitrary function names, f or f1, f2, ... by default
    """
    jets = H.brunovsky.jets
    unknown = [v for v in split if v not in jets]
    if unknown:
        raise ValueError(f"{unknown} are not jet variables of the sub-connection")
    if not split or len(set(split)) == len(jets):
        raise ValueError("a reduction must freeze some but not all jet variables")
    split = [v for v in jets if v in split]
    t = H.system.t
    names = names or function_names(len(split))
    functions = {v: sp.Function(n) for v, n in zip(split, names, strict=True)}
    substitution = {}
    for v in split:
        for s, z in enumerate(jets[v]):
            substitution[z] = function_jet(functions[v], s, t)
    states, drift, tops = [], [], []
    for v, chain in jets.items():
        if v in functions:
            continue
        states += chain[:-1]
        drift += chain[1:]
        tops.append(chain[-1])
    states += H.group
    drift += [normalize(H.lambdas[g].xreplace(substitution)) for g in H.group]
    system = ControlSystem.from_equations(
        states,
        tops,
        drift,
        time=t,
        name=f"{H.system.name}|{','.join(split)}",
        constants=H.system.constants,
    )
    orders = {v: len(jets[v]) - 1 for v in split}
    logger.info("reduced along %s: %s", split, system.equations())
    return Reduction(H, split, functions, orders, substitution, system)


@dataclass
class ReducedAnalysis:
    """SFL verdict of a reduced sub-connection and the f-jet orders of its fundamental functions"""

    reduction: Reduction
    verdict: GoursatVerdict
    transformation: ContactTransformation | None = None
    jet_orders: dict[str, int] = field(default_factory=dict)  # nu variable -> highest needed order
    S: list[Signature] = field(default_factory=list)
    note: str | None = None  # why fundamental functions are missing

    @property
    def is_sfl(self) -> bool:
        return bool(self.verdict.is_sfl)

    @property
    def k_bar(self) -> int:
        return self.verdict.flag.k

    @property
    def kappa_bar(self) -> Signature:
        return self.verdict.signature


def reduced_sfl_analysis(
    R: Reduction, degree_budget: int | None = None, fundamental: bool = True
) -> ReducedAnalysis:
    """sfl_test on the reduced system, then the f-jet orders in Z^l of each order-l function"""
    verdict = sfl_test(R.system)
    analysis = ReducedAnalysis(R, verdict)
    if not verdict.is_sfl or not fundamental:
        return analysis
    names = [f"zbar{i + 1}" for i in range(verdict.signature.width)]
    try:
        phi = contact_coordinates(R.system, names, degree_budget=degree_budget, verdict=verdict)
    except IntegralSearchExhausted as exc:
        analysis.note = str(exc)
        logger.warning("fundamental functions of the reduction unavailable: %s", exc)
        return analysis
    analysis.transformation = phi
    for ff in phi.fundamental:
        top = phi.components[phi.brunovsky.jets[ff.name][-1]]
        orders = {}
        for v, F in R.functions.items():
            found = jet_order(top, F)
            if found is not None:
                orders[v] = found
                analysis.jet_orders[v] = max(analysis.jet_orders.get(v, 0), found)
        analysis.S.append(Signature.from_orders(orders.values()))
        logger.info("order %d fundamental function %s needs f-jets %s", ff.order, ff.expr, orders)
    return analysis


@dataclass
class ProlongationPlan:
    mode: str  # "exact" or "bound"
    base: dict[str, int]  # nu variable -> jet order before prolonging
    orders: dict[str, int]  # nu variable -> jet order after prolonging
    kappa_bar: Signature
    k_bar: int
    joined: Signature | None = None  # join of S, exact mode only
    refined: bool = False

    @property
    def nu(self) -> Signature:
        return Signature.from_orders(self.base.values())

    @property
    def nu_prime(self) -> Signature:
        return Signature.from_orders(self.orders.values())

    @property
    def extra(self) -> dict[str, int]:
        return {v: self.orders[v] - self.base[v] for v in self.orders}

    def expected_signature(self) -> Signature:
        """kappa' = kappa_bar + nu'"""
        return self.kappa_bar + self.nu_prime

    def check_dimensions(self, H: SubConnection) -> bool:
        """dim J^kappa' = N_(nu' - nu) + dim (J^kappa x G)"""
        added = sum(self.extra.values())
        return self.expected_signature().jet_dim() == added + H.system.chart.dim


def prolongation_plan(analysis: ReducedAnalysis, mode: str | None = None) -> ProlongationPlan:
    """Prolongation orders from the fundamental functions (exact) or from 2 k_bar - 1 (bound)"""
    mode = mode or config.MODE
    R = analysis.reduction
    if mode == "exact" and analysis.transformation is None:
        logger.warning("exact plan needs fundamental functions, falling back to the bound")
        mode = "bound"
    if mode == "exact":
        orders = {v: max(r, analysis.jet_orders.get(v, r)) for v, r in R.orders.items()}
        joined = fold(Signature.join, analysis.S) if analysis.S else None
    elif mode == "bound":
        orders = {v: r + 2 * analysis.k_bar - 1 for v, r in R.orders.items()}
        joined = None
    else:
        raise ValueError(f"unknown prolongation mode {mode}")
    plan = ProlongationPlan(
        mode, dict(R.orders), orders, analysis.kappa_bar, analysis.k_bar, joined
    )
    logger.info("%s plan: nu' = %s, orders %s", mode, plan.nu_prime, orders)
    return plan


def prolong(H: SubConnection, orders: dict[str, int]) -> SubConnection:
    """pr H_G: the listed jet variables extended to the given orders"""
    lengths = {v: len(chain) - 1 for v, chain in H.brunovsky.jets.items()}
    for v, r in orders.items():
        if r < lengths[v]:
            raise ValueError(f"cannot prolong {v} from order {lengths[v]} down to {r}")
        lengths[v] = r
    names = sorted(lengths, key=lengths.get)
    kappa = Signature.from_orders(lengths[v] for v in names)
    return build_subconnection(
        kappa,
        names,
        [g.name for g in H.group],
        [H.lambdas[g] for g in H.group],
        H.system.constants,
        name=f"pr {H.system.name}",
    )


def _passes(H: SubConnection, orders: dict[str, int]) -> bool:
    try:
        return bool(sfl_test(prolong(H, orders).system).is_sfl)
    except Inconclusive:
        raise
    except ToolkitError as exc:
        logger.debug("prolongation %s rejected: %s", orders, exc.condition)
        return False


def refine_plan(H: SubConnection, plan: ProlongationPlan) -> ProlongationPlan:
    """Smallest prolongation count per variable, scanning upward, that stays SFL"""
    orders = dict(plan.orders)
    for v, r in plan.base.items():
        for count in range(1, orders[v] - r + 1):
            trial = {**orders, v: r + count}
            if _passes(H, trial):
                orders = trial
                break
    refined = ProlongationPlan(
        plan.mode, plan.base, orders, plan.kappa_bar, plan.k_bar, plan.joined, refined=True
    )
    logger.info("refined plan: orders %s", orders)
    return refined


@dataclass
class Prolongation:
    plan: ProlongationPlan
    subconnection: SubConnection
    verdict: GoursatVerdict
    transformation: ContactTransformation | None = None
    note: str | None = None

    @property
    def signature_matches(self) -> bool:
        return self.verdict.signature == self.plan.expected_signature()


def prolong_and_linearize(
    H: SubConnection,
    plan: ProlongationPlan,
    linearize: bool = True,
    degree_budget: int | None = None,
) -> Prolongation:
    """Build pr H_G for the plan and linearize it.

    Raises:
        ProlongationInsufficient: if pr H_G is not static feedback linearizable
    """
    prolonged = prolong(H, plan.orders)
    try:
        verdict = sfl_test(prolonged.system)
    except Inconclusive:
        raise
    except ToolkitError as exc:
        raise ProlongationInsufficient(f"{plan.orders}: {exc.condition}") from exc
    if not verdict.is_sfl:
        raise ProlongationInsufficient(
            f"pr H_G with orders {plan.orders} fails: {', '.join(verdict.failures)}"
        )
    result = Prolongation(plan, prolonged, verdict)
    if not result.signature_matches:
        logger.warning(
            "prolonged signature %s differs from %s", verdict.signature, plan.expected_signature()
        )
    if linearize:
        names = [f"zeta{i + 1}" for i in range(verdict.signature.width)]
        try:
            result.transformation = contact_coordinates(
                prolonged.system, names, degree_budget=degree_budget, verdict=verdict
            )
        except IntegralSearchExhausted as exc:
            result.note = str(exc)
            logger.warning("contact coordinates of pr H_G unavailable: %s", exc)
    logger.info("pr H_G is SFL with signature %s", verdict.signature)
    return result


@dataclass
class DynamicCompensator:
    """u = beta(t, x, y, W) with y' = y_next and the chain tops driven by new controls"""

    original: ControlSystem
    beta: dict[sp.Symbol, sp.Expr]  # original control -> expression in (t, x, y, W)
    chains: dict[str, list[sp.Symbol]]  # prolonged variable -> y states of its chain
    relations: dict[sp.Symbol, sp.Expr]  # first y of each chain -> its expression on M
    system: ControlSystem  # augmented system
    verdict: GoursatVerdict | None = field(default=None, repr=False)

    def items(self) -> list[tuple[str, str]]:
        return [(u.name, sp.sstr(e)) for u, e in self.beta.items()]


def dynamic_compensator(
    C: ControlSystem, H: SubConnection, plan: ProlongationPlan
) -> DynamicCompensator:
    """Compensator from the top nu-jets of the trivialization.

    The first new state of each prolonged chain is the chain's top jet read on M. Those relations
    are solved for the controls, last control first among those appearing linearly; the controls
    left over become W1, W2, ... and each chain top takes the next W.

    Raises:
        CompensatorSolveFailed: when the relations cannot be solved for the controls
        VerificationFailed: when the augmented system is not SFL or does not reproduce C
    """
    if H.trivialization is None:
        raise ValueError("a dynamic compensator needs the trivialization of the system")
    lift = H.trivialization.components
    prolonged = [v for v, n in plan.extra.items() if n > 0]
    taken = {s.name for s in C.chart.symbols}
    chains: dict[str, list[sp.Symbol]] = {}
    relations: dict[sp.Symbol, sp.Expr] = {}
    for i, v in enumerate(prolonged):
        prefix = "y" if len(prolonged) == 1 else f"y{i + 1}_"
        chain = [sp.Symbol(f"{prefix}{j + 1}") for j in range(plan.extra[v])]
        top = H.brunovsky.jets[v][-1]
        relations[chain[0]] = lift[top]
        chains[v] = chain
    new_names = {s.name for chain in chains.values() for s in chain}
    if new_names & taken:
        raise ValueError(f"compensator names {sorted(new_names & taken)} clash with the system")

    try:
        solved = invert(list(relations.items()), list(C.controls), allow_free=True)
    except NotInvertible as exc:
        raise CompensatorSolveFailed(str(exc)) from exc
    free = [u for u in C.controls if u not in solved]
    count = len(free) + len(prolonged)
    W = [sp.Symbol(f"W{i + 1}") for i in range(count)]
    if {w.name for w in W} & taken:
        raise ValueError("new control names clash with the system")
    rename = dict(zip(free, W, strict=False))
    beta = {
        u: normalize(solved[u].xreplace(rename)) if u in solved else rename[u] for u in C.controls
    }

    states = list(C.states)
    drift = [normalize(f.xreplace(beta)) for f in C.drift]
    for v, chain in chains.items():
        states += chain
        drift += chain[1:] + [W[len(free) + prolonged.index(v)]]
    augmented = ControlSystem.from_equations(
        states, W, drift, time=C.t, name=f"{C.name}+compensator", constants=C.constants
    )
    back = {**relations, **{w: u for u, w in rename.items()}}
    for x, f, g in zip(C.states, C.drift, drift[: len(C.states)], strict=True):
        if not is_zero(g.xreplace(back) - f):
            raise VerificationFailed(f"compensated drift of {x} does not reduce to the original")
    verdict = sfl_test(augmented)
    if not verdict.is_sfl:
        raise VerificationFailed(f"augmented system fails: {', '.join(verdict.failures)}")
    logger.info("dynamic compensator %s", {u.name: sp.sstr(e) for u, e in beta.items()})
    return DynamicCompensator(C, beta, chains, relations, augmented, verdict)


@dataclass
class ExplicitSolution:
    """Every original state and control as an expression in t and arbitrary-function jets"""

    values: dict[sp.Symbol, sp.Expr]
    signature: Signature
    functions: list[str]

    def items(self) -> list[tuple[str, str]]:
        return [(s.name, sp.sstr(e)) for s, e in self.values.items()]


def solution_residuals(C: ControlSystem, values: dict[sp.Symbol, sp.Expr]) -> list[sp.Expr]:
    """x_i' - f_i along the candidate solution"""
    residuals = []
    for x, f in zip(C.states, C.drift, strict=True):
        residuals.append(normalize(sp.diff(values[x], C.t) - f.xreplace(values)))
    return residuals


@dataclass
class FlatOutputs:
    outputs: list[sp.Expr]  # fundamental functions of the augmented system, ascending order
    transformation: ContactTransformation
    solution: ExplicitSolution | None = None
    note: str | None = None


def flat_outputs_and_solution(
    D: DynamicCompensator, degree_budget: int | None = None, candidates=None
) -> FlatOutputs:
    """Fundamental functions of the augmented system and the explicit solution they give.

    Raises:
        VerificationFailed: if a synthesized solution leaves a nonzero residual
    """
    system = D.system
    width = D.verdict.signature.width if D.verdict else len(system.controls)
    names = [f"zeta{i + 1}" for i in range(width)]
    phi = contact_coordinates(
        system, names, candidates=candidates, degree_budget=degree_budget, verdict=D.verdict
    )
    outputs = [ff.expr for ff in phi.fundamental]
    result = FlatOutputs(outputs, phi)
    logger.info("flat outputs %s", outputs)
    fnames = [f"f{i + 1}" for i in range(len(outputs))]
    t = system.t
    equations = []
    for fname, chain in zip(fnames, phi.brunovsky.jets.values(), strict=True):
        F = sp.Function(fname)
        equations += [(function_jet(F, s, t), phi.components[z]) for s, z in enumerate(chain)]
    unknowns = list(system.states) + list(system.controls)
    try:
        solved = invert(equations, unknowns)
    except NotInvertible as exc:
        result.note = f"{InversionFailed.condition}: {exc}"
        logger.warning("explicit solution unavailable: %s", exc)
        return result
    C = D.original
    values = {x: solved[x] for x in C.states}
    for u in C.controls:
        values[u] = normalize(D.beta[u].xreplace(solved))
    residuals = solution_residuals(C, values)
    if not all(is_zero(r) for r in residuals):
        raise VerificationFailed("explicit solution does not satisfy the original system")
    result.solution = ExplicitSolution(values, D.verdict.signature, fnames)
    logger.info("explicit solution verified for %s", C.name)
    return result


def candidate_splits(H: SubConnection) -> list[list[str]]:
    """Single variables first, highest jet order first, then larger subsets"""
    jets = H.brunovsky.jets
    names = list(jets)
    position = {v: i for i, v in enumerate(names)}
    singles = sorted(names, key=lambda v: (-(len(jets[v]) - 1), position[v]))
    splits = [[v] for v in singles]
    for size in range(2, len(names)):
        splits += [list(c) for c in combinations(names, size)]
    return splits


@dataclass
class SplitAttempt:
    split: list[str]
    is_sfl: bool
    reason: str | None = None


def find_reduction(
    H: SubConnection,
    splits: list[list[str]] | None = None,
    degree_budget: int | None = None,
) -> tuple[ReducedAnalysis | None, list[SplitAttempt]]:
    """First split whose reduction is SFL, with every attempt recorded"""
    attempts = []
    for split in splits or candidate_splits(H):
        try:
            analysis = reduced_sfl_analysis(reduce(H, split), degree_budget)
        except Inconclusive:
            raise
        except ToolkitError as exc:
            attempts.append(SplitAttempt(split, False, exc.condition))
            continue
        reason = None if analysis.is_sfl else ", ".join(analysis.verdict.failures)
        attempts.append(SplitAttempt(split, analysis.is_sfl, reason))
        if analysis.is_sfl:
            return analysis, attempts
    return None, attempts


def prolonged_jet_names(H: SubConnection, plan: ProlongationPlan) -> dict[str, list[str]]:
    """Names of the jets added to each prolonged variable"""
    return {
        v: [jet_name(v, s) for s in range(plan.base[v] + 1, plan.orders[v] + 1)]
        for v in plan.orders
    }
