"""Exact scalar expressions.

Expressions are plain SymPy objects. The decidable class we work in is rational functions over
Q in the coordinates, extended by sin/cos pairs of angle arguments (bound by s^2 + c^2 = 1) and by
opaque symbols for exp atoms, arbitrary-function jets f^(k)(t) and irrational constants. The
``Extension`` context moves an expression into that polynomial world and back again.
"""

import logging
from dataclasses import dataclass

import sympy as sp
from sympy.core.function import AppliedUndef

from config import config
from errors import DivisionByZeroExpr, Inconclusive, PoleAtPoint
from probes import get_session

logger = logging.getLogger(__name__)

t = sp.Symbol("t")

Expr = sp.Expr


@dataclass(frozen=True)
class TrigRelation:
    """Extension symbols (s, c) standing for sin and cos of one angle"""

    angle: sp.Expr
    s: sp.Dummy
    c: sp.Dummy
    tau: sp.Dummy  # rational parameter of the unit circle

    def circle(self) -> dict:
        return {
            self.s: 2 * self.tau / (1 + self.tau**2),
            self.c: (1 - self.tau**2) / (1 + self.tau**2),
        }


def _rewrite_trig(e: sp.Expr) -> sp.Expr:
    if e.has(sp.tan, sp.cot, sp.sec, sp.csc):
        e = e.replace(sp.tan, lambda a: sp.sin(a) / sp.cos(a))
        e = e.replace(sp.cot, lambda a: sp.cos(a) / sp.sin(a))
        e = e.replace(sp.sec, lambda a: 1 / sp.cos(a))
        e = e.replace(sp.csc, lambda a: 1 / sp.sin(a))
    if e.has(sp.sin, sp.cos):
        e = sp.expand_trig(e)
    return e


def _opaque_atoms(e: sp.Expr) -> set:
    atoms = set(e.atoms(sp.Derivative)) | set(e.atoms(AppliedUndef))
    atoms |= {f for f in e.atoms(sp.Function) if not isinstance(f, (sp.sin, sp.cos))}
    atoms |= {p for p in e.atoms(sp.Pow) if not p.exp.is_Integer}
    atoms |= set(e.atoms(sp.NumberSymbol))
    return atoms


class Extension:
    """Shared lifting context; expressions lifted together get the same extension symbols"""

    def __init__(self):
        self.relations: dict[sp.Expr, TrigRelation] = {}
        self.opaque: dict[sp.Expr, sp.Dummy] = {}

    def relation(self, angle: sp.Expr) -> TrigRelation:
        if angle not in self.relations:
            self.relations[angle] = TrigRelation(
                angle=angle, s=sp.Dummy("s"), c=sp.Dummy("c"), tau=sp.Dummy("tau")
            )
        return self.relations[angle]

    def lift(self, e) -> sp.Expr:
        """Replace trig atoms by extension symbols and other transcendental atoms by opaques"""
        e = sp.sympify(e)
        if e.is_Rational:
            return e
        e = _rewrite_trig(e)
        mapping = {}
        for atom in e.atoms(sp.sin, sp.cos):
            rel = self.relation(atom.args[0])
            mapping[atom] = rel.s if isinstance(atom, sp.sin) else rel.c
        for atom in sorted(_opaque_atoms(e), key=sp.default_sort_key):
            if atom not in self.opaque:
                self.opaque[atom] = sp.Dummy("o")
            mapping[atom] = self.opaque[atom]
        return e.xreplace(mapping) if mapping else e

    def lower(self, e: sp.Expr) -> sp.Expr:
        back = {}
        for rel in self.relations.values():
            back[rel.s] = sp.sin(rel.angle)
            back[rel.c] = sp.cos(rel.angle)
        for atom, dummy in self.opaque.items():
            back[dummy] = atom
        return e.xreplace(back) if back else e

    def reduce(self, e: sp.Expr) -> sp.Expr:
        """Reduce a polynomial modulo s^2 + c^2 - 1 so every s has degree at most one"""
        e = sp.expand(e)
        for rel in self.relations.values():
            if not e.has(rel.s):
                continue
            poly = sp.Poly(e, rel.s)
            e = sp.expand(
                sp.Add(
                    *[
                        coeff * (1 - rel.c**2) ** (k // 2) * rel.s ** (k % 2)
                        for (k,), coeff in poly.terms()
                    ]
                )
            )
        return e

    def circle(self, e: sp.Expr) -> sp.Expr:
        mapping = {}
        for rel in self.relations.values():
            mapping.update(rel.circle())
        return e.xreplace(mapping) if mapping else e

    def uncircle(self, e: sp.Expr) -> sp.Expr:
        mapping = {rel.tau: rel.s / (1 + rel.c) for rel in self.relations.values()}
        return e.xreplace(mapping) if mapping else e

    def random_point(self, symbols) -> dict:
        """Random rational values for lifted symbols, consistent with every trig relation"""
        session = get_session()
        point = {}
        for rel in self.relations.values():
            s, c = session.circle_point()
            point[rel.s], point[rel.c] = s, c
            point[rel.tau] = s / (1 + c)
        for sym in sorted(set(symbols) - set(point), key=sp.default_sort_key):
            point[sym] = session.rational()
        return point


def evaluate_lifted(e: sp.Expr, values: dict) -> sp.Rational:
    value = e.xreplace(values) if values else e
    if not value.is_Rational:
        raise PoleAtPoint(f"no finite rational value: {value}")
    return value


def sample_lifted(ext: Extension, e: sp.Expr) -> sp.Rational:
    """Evaluate a lifted expression at a fresh random point, retrying on poles"""
    for _ in range(config.PROBE_RETRIES):
        try:
            return evaluate_lifted(e, ext.random_point(e.free_symbols))
        except PoleAtPoint:
            logger.debug("pole hit while probing, drawing a new point")
    raise PoleAtPoint(f"retry budget exhausted for {e}")


def sample_values(e, count: int | None = None) -> list[sp.Rational]:
    """Values of e at fresh random points"""
    e = sp.sympify(e)
    ext = Extension()
    lifted = ext.lift(e)
    return [sample_lifted(ext, lifted) for _ in range(count or config.PROBE_COUNT)]


def normalize(e) -> sp.Expr:
    """Canonical rational form modulo the trig relations"""
    e = sp.sympify(e)
    if e.is_Rational:
        return e
    ext = Extension()
    lifted = ext.lift(e)
    num, den = sp.fraction(sp.cancel(sp.together(lifted)))
    num, den = ext.reduce(num), ext.reduce(den)
    if den == 0:
        raise DivisionByZeroExpr(f"denominator of {e} vanishes")
    if num == 0:
        return sp.Integer(0)
    return ext.lower(sp.cancel(num / den))


def is_zero(e) -> bool:
    """Whether e vanishes on a dense open set; normal form cross-checked at probe points.

    A nonzero normal form is only called into question after at least two independent points
    where e evaluates to zero, so an accidental root at one probe is not a disagreement.
    """
    e = sp.sympify(e)
    if e.is_Number:
        return bool(e == 0)
    ext = Extension()
    lifted = ext.lift(e)
    num, _ = sp.fraction(sp.cancel(sp.together(lifted)))
    if ext.reduce(num) == 0:
        for _ in range(config.PROBE_COUNT):
            if sample_lifted(ext, lifted) != 0:
                raise Inconclusive(f"normal form says {e} vanishes, probes disagree")
        return True
    for _ in range(max(2, config.PROBE_COUNT)):
        if sample_lifted(ext, lifted) != 0:
            return False
    raise Inconclusive(f"normal form says {e} is nonzero, probes disagree")


def diff(e, v: sp.Symbol) -> sp.Expr:
    """Partial derivative; jets of arbitrary functions of t bump under d/dt"""
    return sp.diff(e, v)


def eval_at(e, point: dict, funcs: dict | None = None, trig: dict | None = None) -> sp.Rational:
    """Exact value at a rational point.

    Args:
        e: expression to evaluate
        point: coordinate or constant symbol -> rational
        funcs: arbitrary-function jet (e.g. ``jet(f, 2)``) -> rational
        trig: angle -> (sin value, cos value) on the unit circle

    Trig atoms not listed in ``trig`` get a random circle point, redrawn once on a pole.

    Raises:
        ValueError: when a symbol or function jet of e has no value
        PoleAtPoint: when e has a pole at the point
    """
    e = sp.sympify(e)
    ext = Extension()
    lifted = ext.lift(e)
    values = {sp.sympify(sym): sp.Rational(val) for sym, val in point.items()}
    for atom, val in (funcs or {}).items():
        if atom in ext.opaque:
            values[ext.opaque[atom]] = sp.Rational(val)
    fixed = set()
    for angle, (s, c) in (trig or {}).items():
        rel = ext.relations.get(sp.sympify(angle))
        if rel is not None:
            values[rel.s], values[rel.c] = sp.Rational(s), sp.Rational(c)
            fixed.add(rel)
    free = [rel for rel in ext.relations.values() if rel not in fixed]
    known = set(values) | {sym for rel in free for sym in (rel.s, rel.c)}
    missing = lifted.free_symbols - known
    if missing:
        names = sorted(str(ext.lower(s)) for s in missing)
        raise ValueError(f"no value for {names} in {e}")
    attempts = 2 if free else 1
    for attempt in range(attempts):
        session = get_session()
        for rel in free:
            s, c = session.circle_point()
            values[rel.s], values[rel.c] = s, c
        try:
            return evaluate_lifted(lifted, values)
        except PoleAtPoint:
            if attempt + 1 == attempts:
                raise
            logger.debug("pole at the random trig values of %s, drawing again", e)


def jet(f, k: int) -> sp.Expr:
    """k-th derivative symbol of the arbitrary function f(t)"""
    return f(t) if k == 0 else sp.Derivative(f(t), (t, k))


def jet_order(e, f) -> int | None:
    """Highest derivative order of f(t) in e, None if f does not occur"""
    orders = [
        d.derivative_count
        for d in sp.sympify(e).atoms(sp.Derivative)
        if isinstance(d.expr, AppliedUndef) and d.expr.func == f
    ]
    if not orders and any(a.func == f for a in sp.sympify(e).atoms(AppliedUndef)):
        return 0
    return max(orders) if orders else None


def arbitrary_functions(e) -> set:
    """Arbitrary-function classes occurring in e"""
    return {a.func for a in sp.sympify(e).atoms(AppliedUndef)}
