"""Control symmetries, quotient systems and the contact sub-connection.

A symmetry algebra acts on the system chart. When it is control admissible the invariants give a
quotient control system; when that quotient is static feedback linearizable its contact
coordinates combine with group coordinates into a trivialization carrying the system onto the
normal form span{D_t + lambda^a d/d(eps^a), d/d(top jets)}.
"""

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations

import sympy as sp

from contact import ContactTransformation, first_integrals
from errors import (
    ChartMismatch,
    LinearSolveFailure,
    NormalFormViolation,
    NotExpressibleInInvariants,
    VerificationFailed,
)
from exprcore import diff, is_zero, normalize
from flags import Signature, first_derived
from geometry import (
    Chart,
    ControlSystem,
    CoordinateMap,
    Distribution,
    VectorField,
    bracket,
    invert,
    pushforward_matches,
    rank_of,
)
from goursat import BrunovskyForm, build_brunovsky
from linalg import generic_rank, solve

logger = logging.getLogger(__name__)


class SymmetryAlgebra:
    """Lie algebra spanned by infinitesimal generators on a system chart"""

    def __init__(self, generators: list[VectorField], names: list[str] | None = None):
        if not generators:
            raise ValueError("a symmetry algebra needs at least one generator")
        self.generators = list(generators)
        self.chart = self.generators[0].chart
        self.names = names or [f"X{a + 1}" for a in range(len(self.generators))]
        if len(self.names) != len(self.generators):
            raise ValueError(f"{len(self.names)} names for {len(self.generators)} generators")
        self.structure_constants = self._structure_constants()

    @property
    def dim(self) -> int:
        return len(self.generators)

    @property
    def distribution(self) -> Distribution:
        return Distribution(self.generators, self.chart)

    @property
    def abelian(self) -> bool:
        return all(c == 0 for row in self.structure_constants.values() for c in row)

    def _structure_constants(self) -> dict[tuple[int, int], list[sp.Expr]]:
        """[X_a, X_b] = C^c_ab X_c with constant C, solved pair by pair"""
        r = self.dim
        if rank_of(self.generators) != r:
            raise ValueError("symmetry generators are not pointwise independent")
        columns = [[X.coeffs[i] for X in self.generators] for i in range(self.chart.dim)]
        constants = {}
        for a, b in combinations(range(r), 2):
            B = bracket(self.generators[a], self.generators[b])
            if B.is_zero():
                constants[(a, b)] = [sp.Integer(0)] * r
                continue
            c = solve(columns, list(B.coeffs), f"[{self.names[a]}, {self.names[b]}]")
            if not all(sp.sympify(x).is_number for x in c):
                raise LinearSolveFailure(
                    f"[{self.names[a]}, {self.names[b]}] has non-constant coefficients {c}"
                )
            constants[(a, b)] = c
        return constants

    def preserves(self, D: Distribution) -> list[bool]:
        """Whether [X, D] lies in D, per generator"""
        return [all(D.contains(bracket(X, Y)) for Y in D.generators) for X in self.generators]


@dataclass
class AdmissibilityReport:
    conditions: dict[str, bool] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return not self.failures

    def record(self, name: str, ok: bool):
        self.conditions[name] = ok
        if not ok:
            self.failures.append(name)
            logger.info("admissibility condition failed: %s", name)


def check_control_admissible(C: ControlSystem, gamma: SymmetryAlgebra) -> AdmissibilityReport:
    """Symmetry, time invariance, projectability, dimension and strong transversality"""
    if gamma.chart != C.chart:
        raise ChartMismatch("symmetry generators do not live on the system chart")
    report = AdmissibilityReport()
    r = gamma.dim
    report.record("generators are symmetries of V", all(gamma.preserves(C.distribution)))
    report.record("generators fix t", all(is_zero(X.component(C.t)) for X in gamma.generators))
    base = (C.t,) + C.states
    rows = [[X.component(s) for s in base] for X in gamma.generators]
    report.record("projection to (t, x) has full rank", generic_rank(rows, len(base)) == r)
    report.record("dimension below the number of states", r < len(C.states))
    V1 = first_derived(C.distribution)
    report.record(
        "strongly transverse to V^(1)", rank_of(V1.generators + gamma.generators) == V1.rank + r
    )
    logger.info("control admissibility of %s: %s", C.name, report.admissible)
    return report


@dataclass
class QuotientData:
    """Invariant coordinates on M and the control system they carry"""

    invariants: dict[sp.Symbol, sp.Expr]  # quotient coordinate -> invariant function on M
    system: ControlSystem
    projection: CoordinateMap
    methods: list[str] = field(default_factory=list)  # how each invariant was obtained


def _numbered(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(count)]


def quotient_system(
    C: ControlSystem,
    gamma: SymmetryAlgebra,
    invariants: list | dict | None = None,
    q_names: list[str] | None = None,
    v_names: list[str] | None = None,
    degree_budget: int | None = None,
) -> QuotientData:
    """Quotient control system V/G written in invariant coordinates.

    Args:
        C: the control system
        gamma: a control admissible symmetry algebra of C
        invariants: invariant functions other than t, optionally keyed by quotient coordinate
            name; found by first integral search when omitted
        q_names: names of the quotient states
        v_names: names of the quotient controls
        degree_budget: ansatz degree for the automatic search

    Raises:
        VerificationFailed: a supplied function is not invariant, or the set is dependent
        NotExpressibleInInvariants: the drift of some invariant does not descend to the quotient
    """
    r = gamma.dim
    count = C.chart.dim - r
    if invariants is None:
        basis = first_integrals(gamma.distribution, count, degree_budget)
        pairs = list(zip(basis.functions, basis.methods, strict=True))
        pairs = [(f, m) for f, m in pairs if f != C.t]
        functions = [f for f, _ in pairs]
        methods = [m for _, m in pairs]
    else:
        if isinstance(invariants, dict):
            controls = set(C.controls)
            named = [(str(k), sp.sympify(v)) for k, v in invariants.items()]
            q_names = [k for k, v in named if not (v.free_symbols & controls)]
            v_names = [k for k, v in named if v.free_symbols & controls]
            invariants = [v for _, v in named]
        functions = [normalize(sp.sympify(f)) for f in invariants]
        methods = ["user-supplied"] * len(functions)
        for f in functions:
            for name, X in zip(gamma.names, gamma.generators, strict=True):
                if not is_zero(X.derivative(f)):
                    raise VerificationFailed(f"{f} is not invariant under {name}")
    if len(functions) != count - 1:
        raise VerificationFailed(f"{len(functions)} invariants besides t, expected {count - 1}")
    if rank_of([C.chart.d(C.t)] + [C.chart.d(f) for f in functions]) != count:
        raise VerificationFailed("invariant functions are functionally dependent")

    controls = set(C.controls)
    q_funcs = [f for f in functions if not (f.free_symbols & controls)]
    v_funcs = [f for f in functions if f.free_symbols & controls]
    if len(q_funcs) != len(C.states) - r or len(v_funcs) != len(C.controls):
        raise NotExpressibleInInvariants(
            f"{len(q_funcs)} state and {len(v_funcs)} control invariants; expected "
            f"{len(C.states) - r} and {len(C.controls)}"
        )
    q_syms = [sp.Symbol(n) for n in (q_names or _numbered("q", len(q_funcs)))]
    v_syms = [sp.Symbol(n) for n in (v_names or _numbered("v", len(v_funcs)))]
    clash = {s.name for s in q_syms + v_syms} & {s.name for s in C.chart.symbols}
    if clash:
        raise ValueError(f"quotient names {sorted(clash)} clash with system coordinates")

    mapping = dict(zip(q_syms + v_syms, q_funcs + v_funcs, strict=True))
    unknowns = list(C.states) + list(C.controls)
    solution = invert(list(mapping.items()), unknowns, allow_free=True)
    Z = C.drift_field
    drift = []
    for q, f in zip(q_syms, q_funcs, strict=True):
        expr = normalize(Z(f).xreplace(solution))
        leftover = expr.free_symbols & set(unknowns)
        if leftover:
            raise NotExpressibleInInvariants(
                f"{q}' = {expr} still depends on {sorted(map(str, leftover))}"
            )
        drift.append(expr)
    system = ControlSystem.from_equations(
        q_syms, v_syms, drift, time=C.t, name=f"{C.name}/G", constants=C.constants
    )
    for q, f, g in zip(q_syms, q_funcs, drift, strict=True):
        if not is_zero(Z(f) - g.xreplace(mapping)):
            raise VerificationFailed(f"drift of {q} does not match Z({f}) on M")
    jac = [[diff(v, u) for u in C.controls] for v in v_funcs]
    if generic_rank(jac, len(C.controls)) != len(C.controls):
        raise VerificationFailed("quotient controls do not depend regularly on the controls")
    components = {C.t: C.t, **mapping}
    projection = CoordinateMap(C.chart, system.chart, components)
    logger.info("quotient %s with drift %s", system.name, system.equations())
    return QuotientData(mapping, system, projection, methods)


def group_names(r: int) -> list[str]:
    return ["eps"] if r == 1 else _numbered("eps", r)


def check_epsilon(C: ControlSystem, gamma: SymmetryAlgebra, epsilon: list[sp.Expr]):
    """X_a(eps^b) = delta^b_a and no control dependence

    Raises:
        NormalFormViolation: when the supplied functions are not group coordinates
    """
    if len(epsilon) != gamma.dim:
        raise NormalFormViolation(f"{len(epsilon)} group coordinates for {gamma.dim} generators")
    for b, eps in enumerate(epsilon):
        if eps.free_symbols & set(C.controls):
            raise NormalFormViolation(f"group coordinate {eps} depends on the controls")
        for a, X in enumerate(gamma.generators):
            if not is_zero(X.derivative(eps) - (1 if a == b else 0)):
                raise NormalFormViolation(
                    f"{gamma.names[a]}({eps}) is not {1 if a == b else 0}"
                )


def derive_epsilon(C: ControlSystem, gamma: SymmetryAlgebra) -> list[sp.Expr]:
    """Group coordinates eps^a = sum c_i(t) x^i for translation-type generators.

    Raises:
        ValueError: when some generator is not translation-type
    """
    allowed = {C.t} | set(C.constants)
    for name, X in zip(gamma.names, gamma.generators, strict=True):
        if any(not is_zero(X.component(u)) for u in C.controls):
            raise ValueError(f"{name} moves the controls; supply group coordinates")
        for x in C.states:
            if sp.sympify(X.component(x)).free_symbols - allowed:
                raise ValueError(f"{name} is not translation-type in {x}; supply group coordinates")
    support = [x for x in C.states if any(X.component(x) != 0 for X in gamma.generators)]
    rows = [[X.component(x) for x in support] for X in gamma.generators]
    epsilon = []
    for a in range(gamma.dim):
        rhs = [sp.Integer(1 if b == a else 0) for b in range(gamma.dim)]
        c = solve(rows, rhs, "group coordinates")
        epsilon.append(normalize(sum(ci * x for ci, x in zip(c, support, strict=True))))
    check_epsilon(C, gamma, epsilon)
    logger.info("group coordinates %s", epsilon)
    return epsilon


@dataclass
class SubConnection:
    """H_G = span{D_t + lambda^a d/d(eps^a), d/d(top jets)} on J^kappa x G, as a control system"""

    brunovsky: BrunovskyForm
    group: list[sp.Symbol]
    lambdas: dict[sp.Symbol, sp.Expr]  # group coordinate -> coefficient on t and the jets
    system: ControlSystem
    trivialization: CoordinateMap | None = field(default=None, repr=False)

    @property
    def signature(self) -> Signature:
        return self.brunovsky.signature

    @property
    def distribution(self) -> Distribution:
        return self.system.distribution

    def check_normal_form(self):
        """Every lambda^a is free of the group coordinates"""
        for eps, lam in self.lambdas.items():
            for g in self.group:
                if not is_zero(diff(lam, g)):
                    raise NormalFormViolation(f"coefficient of d/d{eps} depends on {g}: {lam}")

    def items(self) -> list[tuple[str, str]]:
        return [(s.name, sp.sstr(lam)) for s, lam in self.lambdas.items()]


def _subconnection_layout(brunovsky: BrunovskyForm, group: list[sp.Symbol]):
    tops = brunovsky.tops()
    states, drift = [], []
    for chain in brunovsky.jets.values():
        states += chain[:-1]
        drift += chain[1:]
    return states + list(group), drift, tops


def subconnection_chart(brunovsky: BrunovskyForm, group: list[sp.Symbol]) -> Chart:
    states, _, tops = _subconnection_layout(brunovsky, group)
    return Chart.build(brunovsky.chart.time, states, tops)


def build_subconnection(
    kappa: Signature,
    names: list[str] | None,
    group: list[str],
    lambdas: list,
    constants=(),
    name: str = "H_G",
) -> SubConnection:
    """Sub-connection from its signature, jet names, group names and coefficients.

    Raises:
        NormalFormViolation: if a coefficient depends on the group coordinates
    """
    brunovsky = build_brunovsky(kappa, names)
    symbols = [sp.Symbol(g) for g in group]
    if len(lambdas) != len(symbols):
        raise ValueError(f"{len(lambdas)} coefficients for {len(symbols)} group coordinates")
    values = [normalize(sp.sympify(lam)) for lam in lambdas]
    states, drift, tops = _subconnection_layout(brunovsky, symbols)
    system = ControlSystem.from_equations(
        states, tops, drift + values, time=brunovsky.chart.time, name=name, constants=constants
    )
    H = SubConnection(brunovsky, symbols, dict(zip(symbols, values, strict=True)), system)
    H.check_normal_form()
    return H


def trivialize(
    C: ControlSystem,
    gamma: SymmetryAlgebra,
    quotient: QuotientData,
    phi: ContactTransformation,
    epsilon: list | None = None,
    names: list[str] | None = None,
) -> SubConnection:
    """Push V forward along (phi o pi) x eps onto the contact sub-connection.

    Args:
        C: the control system
        gamma: abelian control admissible symmetry algebra
        quotient: quotient of C by gamma
        phi: linearizing contact transformation of the quotient
        epsilon: group coordinates on M, derived for translation-type generators when omitted
        names: group coordinate names, eps or eps1, eps2, ... by default

    Raises:
        NormalFormViolation: when a coefficient lambda^a depends on the group coordinates
        VerificationFailed: when the pushforward does not match the sub-connection
    """
    if not gamma.abelian:
        raise ValueError(
            "trivialization needs an abelian symmetry algebra; for other groups supply map and "
            "subconnection blocks and leave out the symmetry block"
        )
    if epsilon is None:
        epsilon = derive_epsilon(C, gamma)
    else:
        epsilon = [normalize(sp.sympify(e)) for e in epsilon]
        check_epsilon(C, gamma, epsilon)
    group = [sp.Symbol(n) for n in (names or group_names(gamma.dim))]
    brunovsky = phi.brunovsky
    target = subconnection_chart(brunovsky, group)
    clash = {s.name for s in target.symbols if s != target.time} & {
        s.name for s in C.chart.symbols
    }
    if clash:
        raise ValueError(f"sub-connection names {sorted(clash)} clash with system coordinates")

    components: dict[sp.Symbol, sp.Expr] = {target.time: C.t}
    for z in brunovsky.chart.symbols:
        if z != brunovsky.chart.time:
            components[z] = normalize(phi.components[z].xreplace(quotient.invariants))
    components.update(zip(group, epsilon, strict=True))
    lift = CoordinateMap(C.chart, target, components)
    inverse = lift.solve_inverse()
    source = set(C.chart.symbols) - {C.t}
    Z = C.drift_field
    lambdas = []
    for eps, e in zip(group, epsilon, strict=True):
        lam = normalize(Z(e).xreplace(inverse))
        leftover = lam.free_symbols & source
        if leftover:
            raise NormalFormViolation(f"coefficient of d/d{eps} depends on {leftover}")
        lambdas.append(lam)
    H = build_subconnection(
        brunovsky.signature,
        list(brunovsky.jets),
        [g.name for g in group],
        lambdas,
        C.constants,
        name=f"{C.name}:H_G",
    )
    if lift.jacobian_rank() != C.chart.dim:
        raise VerificationFailed("trivialization is not a local diffeomorphism")
    if not pushforward_matches(lift, C.distribution, H.distribution):
        raise VerificationFailed("pushforward of V differs from the sub-connection")
    logger.info("sub-connection coefficients %s", H.items())
    return replace(H, trivialization=lift)


def verify_trivialization(
    C: ControlSystem,
    gamma: SymmetryAlgebra | None,
    components: dict,
    H: SubConnection,
) -> SubConnection:
    """Check a supplied trivialization map against a supplied sub-connection.

    Jet components that are not given are filled by differentiating the previous order along the
    drift of C. Group components are checked against gamma when it is given.

    Raises:
        VerificationFailed: when the map is singular or does not carry V onto H
    """
    target = H.system.chart
    values = {sp.Symbol(str(k)): sp.sympify(v) for k, v in components.items()}
    values.setdefault(target.time, C.t)
    Z = C.drift_field
    for chain in H.brunovsky.jets.values():
        if chain[0] not in values:
            raise VerificationFailed(f"map does not give the jet {chain[0]}")
        for lower, upper in zip(chain, chain[1:], strict=False):
            if upper not in values:
                values[upper] = Z(values[lower])
    missing = [s for s in target.symbols if s not in values]
    if missing:
        raise VerificationFailed(f"map does not give {missing}")
    if gamma is not None:
        check_epsilon(C, gamma, [values[g] for g in H.group])
    lift = CoordinateMap(C.chart, target, {s: values[s] for s in target.symbols})
    if C.chart.dim != target.dim or lift.jacobian_rank() != target.dim:
        raise VerificationFailed("trivialization is not a local diffeomorphism")
    if not pushforward_matches(lift, C.distribution, H.distribution):
        raise VerificationFailed("pushforward of V differs from the sub-connection")
    logger.info("supplied trivialization of %s verified", C.name)
    return replace(H, trivialization=lift)
