"""Charts, vector fields, one-forms, distributions and control systems"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import sympy as sp

from errors import ChartMismatch, IrregularSystem, NotInvertible
from exprcore import diff, is_zero, normalize, t
from linalg import generic_rank, independent_rows, nullspace, numeric_rank, rref, solve

logger = logging.getLogger(__name__)


class Role(str, Enum):
    TIME = "time"
    STATE = "state"
    CONTROL = "control"
    GROUP = "group"
    JET = "jet"
    AUX = "aux"


@dataclass(frozen=True)
class Coordinate:
    """One chart coordinate with its role tag"""

    symbol: sp.Symbol
    role: Role
    variable: str | None = None  # jet variable this coordinate belongs to
    order: int | None = None  # jet order within that variable

    @property
    def name(self) -> str:
        return self.symbol.name


@dataclass(frozen=True)
class Chart:
    """Ordered coordinates; exactly one is time"""

    coordinates: tuple[Coordinate, ...]

    def __post_init__(self):
        names = [c.name for c in self.coordinates]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        if sum(1 for c in self.coordinates if c.role is Role.TIME) != 1:
            raise ValueError("a chart needs exactly one time coordinate")
        orders: dict[str, list[int]] = {}
        for c in self.coordinates:
            if c.role is Role.JET:
                orders.setdefault(c.variable, []).append(c.order)
        for variable, found in orders.items():
            if sorted(found) != list(range(len(found))):
                raise ValueError(f"jet orders of {variable} are not contiguous: {found}")

    @classmethod
    def build(cls, time=t, states=(), controls=(), extra: Iterable[Coordinate] = ()) -> "Chart":
        coords = [Coordinate(time, Role.TIME)]
        coords += [Coordinate(s, Role.STATE) for s in states]
        coords += [Coordinate(u, Role.CONTROL) for u in controls]
        coords += list(extra)
        return cls(tuple(coords))

    @cached_property
    def symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(c.symbol for c in self.coordinates)

    @cached_property
    def _index(self) -> dict[sp.Symbol, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def time(self) -> sp.Symbol:
        return next(c.symbol for c in self.coordinates if c.role is Role.TIME)

    def index(self, symbol: sp.Symbol) -> int:
        return self._index[symbol]

    def of_role(self, role: Role) -> tuple[sp.Symbol, ...]:
        return tuple(c.symbol for c in self.coordinates if c.role is role)

    def coordinate(self, symbol: sp.Symbol) -> Coordinate:
        return self.coordinates[self.index(symbol)]

    def partial(self, symbol: sp.Symbol) -> "VectorField":
        """Coordinate vector field of one coordinate"""
        coeffs = [sp.Integer(0)] * self.dim
        coeffs[self.index(symbol)] = sp.Integer(1)
        return VectorField(self, tuple(coeffs))

    def field(self, components: dict) -> "VectorField":
        """Vector field from a coordinate -> coefficient mapping"""
        coeffs = [sp.Integer(0)] * self.dim
        for sym, value in components.items():
            coeffs[self.index(sym)] = sp.sympify(value)
        return VectorField(self, tuple(coeffs))

    def d(self, f) -> "OneForm":
        """Exterior derivative of a function"""
        return OneForm(self, tuple(normalize(diff(f, s)) for s in self.symbols))


@dataclass(frozen=True)
class VectorField:
    """Coefficient per chart coordinate; calling it takes a Lie derivative"""

    chart: Chart
    coeffs: tuple[sp.Expr, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.chart.dim:
            raise ValueError("coefficient count does not match the chart dimension")

    def __call__(self, f) -> sp.Expr:
        return normalize(self.derivative(f))

    def derivative(self, f) -> sp.Expr:
        """Lie derivative without normalization"""
        f = sp.sympify(f)
        total = sp.Integer(0)
        for c, s in zip(self.coeffs, self.chart.symbols, strict=True):
            if c != 0:
                total += c * diff(f, s)
        return total

    def __add__(self, other: "VectorField") -> "VectorField":
        _same_chart(self, other)
        return VectorField(
            self.chart,
            tuple(normalize(a + b) for a, b in zip(self.coeffs, other.coeffs, strict=True)),
        )

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + other.scale(-1)

    def scale(self, f) -> "VectorField":
        return VectorField(self.chart, tuple(normalize(f * c) for c in self.coeffs))

    def component(self, symbol: sp.Symbol) -> sp.Expr:
        return self.coeffs[self.chart.index(symbol)]

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.coeffs)

    def normalized(self) -> "VectorField":
        return VectorField(self.chart, tuple(normalize(c) for c in self.coeffs))

    def __str__(self) -> str:
        terms = [
            f"({sp.sstr(c)})*d_{s}" if c != 1 else f"d_{s}"
            for c, s in zip(self.coeffs, self.chart.symbols, strict=True)
            if c != 0
        ]
        return " + ".join(terms) or "0"


@dataclass(frozen=True)
class OneForm:
    """Coefficient per coordinate differential"""

    chart: Chart
    coeffs: tuple[sp.Expr, ...]

    def __call__(self, X: VectorField) -> sp.Expr:
        _same_chart(self, X)
        return normalize(sum(a * b for a, b in zip(self.coeffs, X.coeffs, strict=True)))

    def __str__(self) -> str:
        terms = [
            f"({sp.sstr(c)})*d{s}" if c != 1 else f"d{s}"
            for c, s in zip(self.coeffs, self.chart.symbols, strict=True)
            if c != 0
        ]
        return " + ".join(terms) or "0"


def _same_chart(a, b):
    if a.chart != b.chart:
        raise ChartMismatch(f"{a} and {b} live on different charts")


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Lie bracket [X, Y]^i = X(Y^i) - Y(X^i)"""
    _same_chart(X, Y)
    return VectorField(
        X.chart,
        tuple(
            normalize(X.derivative(b) - Y.derivative(a))
            for a, b in zip(X.coeffs, Y.coeffs, strict=True)
        ),
    )


def field_matrix(vectors: Sequence) -> list[list[sp.Expr]]:
    return [list(v.coeffs) for v in vectors]


def rank_of(vectors: Sequence) -> int:
    """Generic rank of a list of vector fields or one-forms"""
    if not vectors:
        return 0
    return generic_rank(field_matrix(vectors), vectors[0].chart.dim)


class Distribution:
    """Span of vector fields on one chart, with cached generic rank"""

    def __init__(self, generators: Iterable[VectorField], chart: Chart | None = None):
        self.generators = [g for g in generators]
        if chart is None:
            if not self.generators:
                raise ValueError("an empty distribution needs an explicit chart")
            chart = self.generators[0].chart
        for g in self.generators:
            if g.chart != chart:
                raise ChartMismatch("distribution generators live on different charts")
        self.chart = chart

    @cached_property
    def rank(self) -> int:
        return rank_of(self.generators)

    @cached_property
    def corank(self) -> int:
        return self.chart.dim - self.rank

    def basis(self) -> list[VectorField]:
        """Earliest generically independent generators"""
        if not self.generators:
            return []
        keep = independent_rows(field_matrix(self.generators), self.chart.dim)
        return [self.generators[i] for i in sorted(keep)]

    def extend(self, fields: Iterable[VectorField]) -> "Distribution":
        return Distribution(self.generators + list(fields), self.chart)

    def __add__(self, other: "Distribution") -> "Distribution":
        return self.extend(other.generators)

    def contains(self, X: VectorField) -> bool:
        rows = field_matrix(self.generators + [X])
        return numeric_rank(rows, self.chart.dim) == self.rank

    def contains_all(self, other: "Distribution") -> bool:
        return numeric_rank(field_matrix(self.generators + other.generators), self.chart.dim) == (
            self.rank
        )

    def equals(self, other: "Distribution") -> bool:
        """Equality by mutual containment"""
        return self.rank == other.rank and self.contains_all(other)

    def is_involutive(self) -> bool:
        gens = self.basis()
        extra = [bracket(a, b) for i, a in enumerate(gens) for b in gens[i + 1 :]]
        return numeric_rank(field_matrix(gens + extra), self.chart.dim) == self.rank

    def canonical(self) -> "Distribution":
        """Generators in reduced row echelon form, pivots in chart order"""
        rows, _ = rref(field_matrix(self.generators), self.chart.dim, "canonical")
        return Distribution([VectorField(self.chart, tuple(r)) for r in rows], self.chart)

    def annihilator(self) -> list[OneForm]:
        return annihilator(self)

    def __len__(self) -> int:
        return len(self.generators)

    def __str__(self) -> str:
        return "span{" + ", ".join(str(g) for g in self.generators) + "}"


def annihilator(D: Distribution) -> list[OneForm]:
    """Basis of one-forms vanishing on D, one per non-pivot coordinate"""
    chart = D.chart
    rows, pivots = rref(field_matrix(D.generators), chart.dim, "annihilator")
    forms = []
    for free in range(chart.dim):
        if free in pivots:
            continue
        coeffs = [sp.Integer(0)] * chart.dim
        coeffs[free] = sp.Integer(1)
        for i, p in enumerate(pivots):
            coeffs[p] = normalize(-rows[i][free])
        forms.append(OneForm(chart, tuple(coeffs)))
    return forms


def kernel(forms: Sequence[OneForm], chart: Chart) -> Distribution:
    """Vector fields annihilated by every form"""
    rows = [list(w.coeffs) for w in forms]
    vectors = nullspace(rows, chart.dim, "kernel")
    return Distribution([VectorField(chart, tuple(v)) for v in vectors], chart)


INVERSE_FUNCTIONS = (sp.asin, sp.acos, sp.atan, sp.acot, sp.asec, sp.acsc, sp.log, sp.LambertW)


def acceptable_solution(expr: sp.Expr) -> bool:
    """No inverse functions and no fractional powers of non-constants"""
    if expr.has(*INVERSE_FUNCTIONS):
        return False
    return not any(
        not p.exp.is_Integer and not p.base.is_number for p in expr.atoms(sp.Pow)
    )


def _linear_solution(equation: sp.Expr, unknown: sp.Symbol) -> sp.Expr | None:
    num = sp.numer(sp.together(equation))
    if not num.has(unknown):
        return None
    try:
        poly = sp.Poly(num, unknown)
    except sp.PolynomialError:
        return None
    if poly.degree() != 1:
        return None
    a, b = poly.all_coeffs()
    if a.has(unknown) or b.has(unknown):
        return None
    return normalize(-b / a)


def _single_solution(equation: sp.Expr, unknown: sp.Symbol) -> sp.Expr | None:
    solution = _linear_solution(equation, unknown)
    if solution is not None:
        return solution
    try:
        found = sp.solve(equation, unknown, dict=False)
    except (NotImplementedError, ValueError):
        return None
    if len(found) != 1 or not acceptable_solution(found[0]):
        return None
    return normalize(found[0])


def invert(
    equations: Sequence[tuple[sp.Expr, sp.Expr]],
    unknowns: Sequence[sp.Symbol],
    allow_free: bool = False,
) -> dict[sp.Symbol, sp.Expr]:
    """Solve ``lhs = rhs(unknowns)`` for the unknowns.

    Single-unknown equations are solved first, then the remainder jointly by a linear solve.
    With ``allow_free`` the latest unknown in an equation may be eliminated with the others left
    as free parameters, which is what quotient rewriting needs.

    Raises:
        NotInvertible: when the heuristics cannot produce a unique admissible solution
    """
    solved: dict[sp.Symbol, sp.Expr] = {}
    pending = [sp.sympify(lhs) - sp.sympify(rhs) for lhs, rhs in equations]
    order = {u: i for i, u in enumerate(unknowns)}
    while pending:
        progress = False
        for idx, eq in enumerate(pending):
            eq = normalize(eq.xreplace(solved)) if solved else eq
            pending[idx] = eq
            present = [u for u in unknowns if u not in solved and eq.has(u)]
            if not present:
                if not is_zero(eq):
                    raise NotInvertible(f"inconsistent equation {eq} = 0")
                pending.pop(idx)
                progress = True
                break
            if len(present) == 1:
                value = _single_solution(eq, present[0])
                if value is None:
                    raise NotInvertible(f"cannot solve {eq} = 0 for {present[0]}")
                _substitute_into(solved, present[0], value)
                pending.pop(idx)
                progress = True
                break
        if progress:
            continue
        pending = [normalize(eq.xreplace(solved)) for eq in pending]
        remaining = [u for u in unknowns if u not in solved and any(eq.has(u) for eq in pending)]
        if len(remaining) == len(pending):
            joint = _joint_linear(pending, remaining)
            if joint is not None:
                for u, value in joint.items():
                    _substitute_into(solved, u, value)
                pending = []
                continue
        if not allow_free:
            raise NotInvertible(f"no triangular or linear inversion for {pending}")
        eq = min(pending, key=lambda e: sum(1 for u in remaining if e.has(u)))
        candidates = sorted((u for u in remaining if eq.has(u)), key=order.get, reverse=True)
        for u in candidates:
            value = _linear_solution(eq, u)
            if value is not None:
                _substitute_into(solved, u, value)
                pending.remove(eq)
                break
        else:
            raise NotInvertible(f"no unknown of {eq} appears linearly")
    return solved


def _substitute_into(solved: dict, unknown: sp.Symbol, value: sp.Expr):
    for u in list(solved):
        solved[u] = normalize(solved[u].xreplace({unknown: value}))
    solved[unknown] = value


def _joint_linear(equations, unknowns) -> dict | None:
    rows = [[sp.diff(eq, u) for u in unknowns] for eq in equations]
    if any(r.has(u) for row in rows for r in row for u in unknowns):
        return None
    rhs = [normalize(-eq.xreplace(dict.fromkeys(unknowns, 0))) for eq in equations]
    rows = [[normalize(r) for r in row] for row in rows]
    if numeric_rank(rows, len(unknowns)) != len(unknowns):
        return None
    values = solve(rows, rhs, "invert")
    return dict(zip(unknowns, values, strict=True))


@dataclass
class CoordinateMap:
    """Map from a source chart to a target chart given by target-coordinate expressions"""

    source: Chart
    target: Chart
    components: dict[sp.Symbol, sp.Expr]  # target coordinate -> expression on the source
    inverse: dict[sp.Symbol, sp.Expr] | None = None  # source coordinate -> target expression

    def __post_init__(self):
        missing = [s for s in self.target.symbols if s not in self.components]
        if missing:
            raise ValueError(f"map does not define target coordinates {missing}")

    def jacobian_rank(self) -> int:
        rows = [
            [diff(self.components[y], x) for x in self.source.symbols] for y in self.target.symbols
        ]
        return generic_rank(rows, self.source.dim)

    def solve_inverse(self) -> dict[sp.Symbol, sp.Expr]:
        if self.inverse is None:
            equations = [(y, self.components[y]) for y in self.target.symbols]
            unknowns = [s for s in self.source.symbols if s != self.source.time]
            self.inverse = invert(equations, unknowns)
            self.inverse.setdefault(self.source.time, self.target.time)
        return self.inverse

    def differential(self, X: VectorField) -> list[sp.Expr]:
        """Components of d(map)(X) as functions on the source"""
        return [X(self.components[y]) for y in self.target.symbols]


def pushforward(phi: CoordinateMap, X: VectorField) -> VectorField:
    """d(phi)(X) rewritten in target coordinates via the inverse map"""
    if phi.source != X.chart:
        raise ChartMismatch("vector field is not on the map's source chart")
    inverse = phi.solve_inverse()
    coeffs = tuple(normalize(c.xreplace(inverse)) for c in phi.differential(X))
    leftovers = {s for c in coeffs for s in c.free_symbols} & (
        set(phi.source.symbols) - set(phi.target.symbols)
    )
    if leftovers:
        raise NotInvertible(f"pushforward still depends on {sorted(map(str, leftovers))}")
    return VectorField(phi.target, coeffs)


def pushforward_matches(phi: CoordinateMap, D: Distribution, target: Distribution) -> bool:
    """Check d(phi)(D) = target o phi at probe points without inverting phi"""
    substitution = {y: phi.components[y] for y in phi.target.symbols}
    composed = [[normalize(c.xreplace(substitution)) for c in g.coeffs] for g in target.generators]
    images = [phi.differential(g) for g in D.generators]
    width = phi.target.dim
    target_rank = numeric_rank(composed, width)
    image_rank = numeric_rank(images, width)
    joint = numeric_rank(composed + images, width)
    logger.debug(
        "composition check ranks: target %d, image %d, joint %d", target_rank, image_rank, joint
    )
    return target_rank == image_rank == joint


@dataclass
class ControlSystem:
    """x' = f(t, x, u) on a chart with time, state and control roles"""

    chart: Chart
    drift: tuple[sp.Expr, ...]  # one expression per state, in chart order
    name: str = "system"
    constants: tuple[sp.Symbol, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.drift = tuple(sp.sympify(f) for f in self.drift)
        if len(self.drift) != len(self.states):
            raise ValueError(f"{len(self.drift)} drift equations for {len(self.states)} states")

    @classmethod
    def from_equations(cls, states, controls, drift, time=t, name="system", constants=()):
        return cls(Chart.build(time, states, controls), tuple(drift), name, tuple(constants))

    @property
    def t(self) -> sp.Symbol:
        return self.chart.time

    @property
    def states(self) -> tuple[sp.Symbol, ...]:
        return self.chart.of_role(Role.STATE)

    @property
    def controls(self) -> tuple[sp.Symbol, ...]:
        return self.chart.of_role(Role.CONTROL)

    @cached_property
    def drift_field(self) -> VectorField:
        """Z = d_t + f^i d_{x^i}"""
        components = {self.t: 1}
        components.update(dict(zip(self.states, self.drift, strict=True)))
        return self.chart.field(components)

    @cached_property
    def control_fields(self) -> list[VectorField]:
        return [self.chart.partial(u) for u in self.controls]

    @cached_property
    def distribution(self) -> Distribution:
        return Distribution([self.drift_field] + self.control_fields, self.chart)

    @cached_property
    def control_span(self) -> Distribution:
        return Distribution(self.control_fields, self.chart)

    def check_regular(self):
        """The control Jacobian must have full rank m"""
        if not self.controls:
            return
        rows = [[diff(f, u) for u in self.controls] for f in self.drift]
        rank = generic_rank(rows, len(self.controls))
        if rank != len(self.controls):
            raise IrregularSystem(f"rank df/du = {rank} < {len(self.controls)}")

    def equations(self) -> dict[str, str]:
        return {f"{x}'": sp.sstr(f) for x, f in zip(self.states, self.drift, strict=True)}
