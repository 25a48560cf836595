"""Derived flags, Cauchy bundles, intersection bundles and the numbers classifying them"""

import logging
from dataclasses import dataclass
from itertools import combinations

from errors import LinearSolveFailure, NotBracketStabilizing
from geometry import Distribution, VectorField, bracket, field_matrix
from linalg import independent_rows, nullspace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Signature:
    """<rho_1, ..., rho_k>: rho_i chains of order i"""

    rho: tuple[int, ...]

    @property
    def is_valid(self) -> bool:
        return bool(self.rho) and all(r >= 0 for r in self.rho) and self.rho[-1] >= 1

    @classmethod
    def of(cls, *rho: int) -> "Signature":
        return cls(tuple(rho)).trimmed()

    @classmethod
    def from_orders(cls, orders) -> "Signature":
        """Signature with one chain per listed jet order"""
        orders = [o for o in orders if o > 0]
        if not orders:
            return cls(())
        rho = [0] * max(orders)
        for o in orders:
            rho[o - 1] += 1
        return cls(tuple(rho))

    def trimmed(self) -> "Signature":
        rho = list(self.rho)
        while rho and rho[-1] == 0:
            rho.pop()
        return Signature(tuple(rho))

    @property
    def k(self) -> int:
        return len(self.rho)

    @property
    def delta_k(self) -> int:
        return self.rho[-1] if self.rho else 0

    @property
    def width(self) -> int:
        """Number of chains, i.e. the number of controls"""
        return sum(self.rho)

    def orders(self) -> list[int]:
        """Chain orders in ascending order"""
        return [i + 1 for i, r in enumerate(self.rho) for _ in range(r)]

    def jet_dim(self) -> int:
        """dim J^kappa = 1 + sum (1 + i) rho_i"""
        return 1 + sum((i + 1 + 1) * r for i, r in enumerate(self.rho))

    def is_equal_order(self) -> bool:
        return bool(self.rho) and all(r == 0 for r in self.rho[:-1])

    def __add__(self, other: "Signature") -> "Signature":
        width = max(self.k, other.k)
        a = list(self.rho) + [0] * (width - self.k)
        b = list(other.rho) + [0] * (width - other.k)
        return Signature(tuple(x + y for x, y in zip(a, b, strict=True)))

    def leq(self, other: "Signature") -> bool:
        """Jet inclusion order: J^self sits inside J^other"""
        mine, theirs = self.orders(), other.orders()
        if len(mine) > len(theirs):
            return False
        theirs = theirs[len(theirs) - len(mine) :] if mine else theirs
        return all(a <= b for a, b in zip(mine, theirs, strict=True))

    def join(self, other: "Signature") -> "Signature":
        """Smallest signature whose jet space contains both"""
        a, b = self.orders(), other.orders()
        width = max(len(a), len(b))
        a = [0] * (width - len(a)) + a
        b = [0] * (width - len(b)) + b
        return Signature.from_orders([max(x, y) for x, y in zip(a, b, strict=True)])

    def __str__(self) -> str:
        return "<" + ",".join(str(r) for r in self.rho) + ">"


@dataclass(frozen=True)
class RefinedDerivedType:
    """[[m0, chi0], [m1, chi1_0, chi1], ..., [mk, chik]]"""

    entries: tuple[tuple[int, ...], ...]

    @property
    def ms(self) -> list[int]:
        return [e[0] for e in self.entries]

    def as_lists(self) -> list[list[int]]:
        return [list(e) for e in self.entries]

    def __str__(self) -> str:
        return str(self.as_lists()).replace(" ", "")


class DerivedFlag:
    """V = V^(0) in V^(1) in ... in V^(k) with the bundles computed from it cached"""

    def __init__(self, levels: list[Distribution]):
        self.levels = levels
        self._chars: dict[int, Distribution] = {}
        self._intersections: dict[int, Distribution] = {}

    @property
    def k(self) -> int:
        return len(self.levels) - 1

    @property
    def chart(self):
        return self.levels[0].chart

    @property
    def ranks(self) -> list[int]:
        return [level.rank for level in self.levels]

    @property
    def reaches_tangent_bundle(self) -> bool:
        return self.ranks[-1] == self.chart.dim

    def char(self, j: int) -> Distribution:
        if j not in self._chars:
            self._chars[j] = cauchy_bundle(self.levels[j])
        return self._chars[j]

    def intersection(self, i: int) -> Distribution:
        if i not in self._intersections:
            self._intersections[i] = intersection_bundle(self, i)
        return self._intersections[i]


def first_derived(D: Distribution) -> Distribution:
    """V^(1) = V + [V, V]"""
    gens = D.basis()
    brackets = [bracket(a, b) for a, b in combinations(gens, 2)]
    return Distribution(gens + brackets, D.chart)


def derived_flag(D: Distribution) -> DerivedFlag:
    """Adjoin brackets until the rank stabilizes"""
    chart = D.chart
    gens = D.basis()
    levels = [Distribution(gens, chart)]
    fresh = set(range(len(gens)))
    while True:
        candidates = [
            bracket(gens[i], gens[j])
            for i, j in combinations(range(len(gens)), 2)
            if i in fresh or j in fresh
        ]
        pool = gens + candidates
        keep = independent_rows(field_matrix(pool), chart.dim)
        added = [pool[i] for i in sorted(keep) if i >= len(gens)]
        if len(keep) < len(gens):
            logger.debug("flag level lost rank while adjoining brackets")
        if not added:
            break
        fresh = set(range(len(gens), len(gens) + len(added)))
        gens = gens + added
        levels.append(Distribution(gens, chart))
        logger.debug("derived flag rank %d", len(gens))
        if len(levels) - 1 > chart.dim:
            raise NotBracketStabilizing(f"derived length exceeds {chart.dim}")
    return DerivedFlag(levels)


def cauchy_bundle(D: Distribution) -> Distribution:
    """Char D: the combinations C of generators with [C, D] in D"""
    chart = D.chart
    gens = D.basis()
    forms = D.annihilator()
    if not forms:
        return Distribution(gens, chart)
    r = len(gens)
    brackets: dict[tuple[int, int], VectorField] = {}
    for i, j in combinations(range(r), 2):
        brackets[(i, j)] = bracket(gens[i], gens[j])
    rows = []
    for j in range(r):
        for w in forms:
            row = []
            for i in range(r):
                if i == j:
                    row.append(0)
                elif i < j:
                    row.append(w(brackets[(i, j)]))
                else:
                    row.append(-w(brackets[(j, i)]))
            rows.append(row)
    vectors = nullspace(rows, r, "cauchy_bundle")
    fields = []
    for c in vectors:
        total = None
        for coeff, g in zip(c, gens, strict=True):
            if coeff == 0:
                continue
            term = g.scale(coeff)
            total = term if total is None else total + term
        fields.append(total)
    char = Distribution(fields, chart)
    if fields and not char.is_involutive():
        raise LinearSolveFailure("Cauchy bundle candidate is not involutive")
    return char


def intersection_bundle(flag: DerivedFlag, i: int) -> Distribution:
    """Char V^(i)_(i-1) = V^(i-1) meet Char V^(i)"""
    if not 1 <= i <= flag.k:
        raise ValueError(f"intersection index {i} outside 1..{flag.k}")
    return intersect(flag.levels[i - 1], flag.char(i))


def intersect(A: Distribution, B: Distribution) -> Distribution:
    """A meet B as combinations of B's generators annihilated by ann A"""
    chart = A.chart
    forms = A.annihilator()
    gens = B.basis()
    if not forms or not gens:
        return Distribution(gens, chart)
    rows = [[w(g) for g in gens] for w in forms]
    vectors = nullspace(rows, len(gens), "intersection")
    fields = []
    for c in vectors:
        total = None
        for coeff, g in zip(c, gens, strict=True):
            if coeff == 0:
                continue
            term = g.scale(coeff)
            total = term if total is None else total + term
        fields.append(total)
    return Distribution(fields, chart)


def refined_derived_type(source) -> RefinedDerivedType:
    """Assemble [[m_j, chi^j_(j-1), chi^j]] from a distribution or an existing flag"""
    flag = source if isinstance(source, DerivedFlag) else derived_flag(source)
    entries = []
    for j, level in enumerate(flag.levels):
        chi = flag.char(j).rank
        if j == 0 or j == flag.k:
            entries.append((level.rank, chi))
        else:
            entries.append((level.rank, flag.intersection(j).rank, chi))
    return RefinedDerivedType(tuple(entries))


def vel_decel(flag: DerivedFlag) -> tuple[Signature, Signature]:
    """Velocity Delta_j = m_j - m_(j-1) and deceleration <-Delta^2_2, ..., -Delta^2_k, Delta_k>"""
    m = flag.ranks
    delta = [m[j] - m[j - 1] for j in range(1, len(m))]
    if not delta:
        return Signature(()), Signature(())
    decel = [-(delta[j] - delta[j - 1]) for j in range(1, len(delta))] + [delta[-1]]
    return Signature(tuple(delta)), Signature(tuple(decel))
