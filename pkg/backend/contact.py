"""Contact coordinates for static feedback linearizable systems.

Fundamental functions are first integrals of the intersection bundles and of the fundamental
bundle; every other contact coordinate follows by differentiating along the drift field.
"""

import logging
from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations_with_replacement

import sympy as sp

from config import config
from errors import (
    IntegralSearchExhausted,
    NotIntegrable,
    NotStaticFeedbackLinearizable,
    VerificationFailed,
    ZTauNotOne,
)
from exprcore import Extension, is_zero, normalize
from flags import derived_flag
from geometry import (
    Chart,
    ControlSystem,
    CoordinateMap,
    Distribution,
    OneForm,
    Role,
    VectorField,
    rank_of,
)
from goursat import BrunovskyForm, GoursatVerdict, ad_span, build_brunovsky, sfl_test
from linalg import nullspace

logger = logging.getLogger(__name__)

MAX_ANSATZ_TERMS = 300


@dataclass
class FirstIntegralBasis:
    """First integrals found for one distribution, with how each was found"""

    functions: list[sp.Expr] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)  # how each function was found

    def __len__(self) -> int:
        return len(self.functions)


@dataclass
class FundamentalFunction:
    name: str  # contact variable it defines
    expr: sp.Expr
    order: int  # length of its chain


@dataclass
class ContactTransformation:
    """Map from the source chart onto J^kappa, z_s = Z^s(z_0) along each chain"""

    source: Chart
    brunovsky: BrunovskyForm
    components: dict[sp.Symbol, sp.Expr]  # jet coordinate -> expression on the source
    drift: VectorField
    tau: sp.Expr
    fundamental: list[FundamentalFunction]
    verdict: GoursatVerdict | None = field(default=None, repr=False)

    def as_map(self) -> CoordinateMap:
        return CoordinateMap(self.source, self.brunovsky.chart, self.components)

    def items(self) -> list[tuple[str, str]]:
        """Printed (jet name, expression) pairs in jet chart order"""
        return [(s.name, sp.sstr(self.components[s])) for s in self.brunovsky.chart.symbols]

    def verify(self):
        """Z(tau) = 1, controls kill every non-top jet, full Jacobian rank"""
        if self.source.dim != self.brunovsky.chart.dim:
            raise VerificationFailed(
                f"source dimension {self.source.dim} differs from {self.brunovsky.chart.dim}"
            )
        if not is_zero(self.drift(self.tau) - 1):
            raise VerificationFailed("drift does not map to the total derivative")
        tops = set(self.brunovsky.tops())
        controls = self.source.of_role(Role.CONTROL)
        for z, expr in self.components.items():
            if z in tops or z == self.brunovsky.chart.time:
                continue
            for u in controls:
                if not is_zero(sp.diff(expr, u)):
                    raise VerificationFailed(f"{z} = {expr} depends on the control {u}")
        rank = self.as_map().jacobian_rank()
        if rank != self.source.dim:
            raise VerificationFailed(f"Jacobian rank {rank} below {self.source.dim}")
        logger.info("contact transformation verified on %d coordinates", self.source.dim)


def fundamental_bundle(
    D: Distribution,
    Z: VectorField,
    tau,
    k: int,
    pi0: Distribution | None = None,
    corank: int | None = None,
) -> Distribution:
    """Pi = span{Pi0, ad(Z) Pi0, ..., ad(Z)^(k-1) Pi0}.

    Args:
        D: the system distribution
        Z: a field of D with Z(tau) = 1
        tau: the time integral
        k: derived length
        pi0: seed bundle, Char V^(1)_0 of D by default
        corank: expected corank of the result, checked when given

    Raises:
        ZTauNotOne: if Z(tau) is not identically one
        NotIntegrable: if the result is not bracket closed
    """
    if not is_zero(Z(tau) - 1):
        raise ZTauNotOne(f"Z({tau}) = {Z(tau)}")
    if pi0 is None:
        pi0 = derived_flag(D).intersection(1)
    pi = ad_span(pi0, Z, k)
    if not pi.is_involutive():
        raise NotIntegrable("fundamental bundle is not bracket closed")
    if corank is not None and pi.corank != corank:
        raise VerificationFailed(f"fundamental bundle has corank {pi.corank}, expected {corank}")
    logger.debug("fundamental bundle of rank %d", pi.rank)
    return pi


def _angles(generators: list[VectorField], variables: list[sp.Symbol]) -> list[sp.Symbol]:
    found = set()
    trig = (sp.sin, sp.cos, sp.tan, sp.cot, sp.sec, sp.csc)
    for g in generators:
        for c in g.coeffs:
            for atom in sp.sympify(c).atoms(*trig):
                if atom.args[0] in variables:
                    found.add(atom.args[0])
    return [v for v in variables if v in found]


def _monomials(variables: list[sp.Symbol], angles: list[sp.Symbol], degree: int) -> list:
    base = list(variables) + [sp.cos(a) for a in angles] + [sp.sin(a) for a in angles]
    sines = [sp.sin(a) for a in angles]
    terms = []
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(base, d):
            if any(combo.count(s) > 1 for s in sines):
                continue
            terms.append(sp.Mul(*combo))
    return terms


def _ansatz_kernel(
    generators: list[VectorField], variables: list[sp.Symbol], angles, monomials: list
) -> list[sp.Expr]:
    """Combinations of monomials annihilated by every generator, coefficients in the parameters"""
    if not monomials:
        return []
    ext = Extension()
    poly_gens = list(variables)
    for a in angles:
        rel = ext.relation(a)
        poly_gens += [rel.s, rel.c]
    rows = []
    for X in generators:
        lifted = [sp.together(ext.lift(X.derivative(m))) for m in monomials]
        fractions = [sp.fraction(e) for e in lifted]
        den = reduce(sp.lcm, [d for _, d in fractions])
        table: dict[tuple, list] = {}
        for i, (num, d) in enumerate(fractions):
            n = ext.reduce(sp.expand(num * sp.cancel(den / d)))
            if n == 0:
                continue
            for monom, coeff in sp.Poly(n, *poly_gens).terms():
                table.setdefault(monom, [sp.Integer(0)] * len(monomials))[i] = coeff
        rows += [[ext.lower(e) for e in row] for row in table.values()]
    if not rows:
        return list(monomials)
    vectors = nullspace(rows, len(monomials), "first_integrals")
    return [normalize(sum(c * m for c, m in zip(v, monomials, strict=True))) for v in vectors]


def first_integrals(
    D: Distribution,
    count: int,
    degree_budget: int | None = None,
    candidates=None,
    exclude: list[OneForm] | None = None,
) -> FirstIntegralBasis:
    """Find ``count`` first integrals of D, independent of each other and of ``exclude``.

    Coordinates annihilated by D come first in chart order, then supplied candidates, then a
    polynomial ansatz of growing degree in the remaining coordinates (and sin/cos of angle
    coordinates) whose coefficients may depend on the invariant coordinates.

    Raises:
        NotIntegrable: if D is not bracket closed
        IntegralSearchExhausted: fewer than ``count`` integrals found; carries the partial basis
    """
    chart = D.chart
    gens = D.basis()
    if not D.is_involutive():
        raise NotIntegrable("first integrals requested for a non-integrable distribution")
    budget = config.DEGREE_BUDGET if degree_budget is None else degree_budget
    exclude = list(exclude or [])
    result = FirstIntegralBasis()
    forms = list(exclude)
    current = rank_of(forms) if forms else 0

    def accept(phi, method: str) -> bool:
        nonlocal current
        phi = normalize(phi)
        if phi.is_number or not all(is_zero(X.derivative(phi)) for X in gens):
            return False
        candidate = forms + [chart.d(phi)]
        rank = rank_of(candidate)
        if rank <= current:
            return False
        forms.append(chart.d(phi))
        current = rank
        result.functions.append(phi)
        result.methods.append(method)
        logger.debug("first integral %s (%s)", phi, method)
        return True

    params = [s for s in chart.symbols if all(is_zero(X.component(s)) for X in gens)]
    for s in params:
        if len(result) == count:
            return result
        accept(s, "coordinate")
    for phi in candidates or []:
        if len(result) == count:
            return result
        accept(sp.sympify(phi), "user-supplied")
    variables = [s for s in chart.symbols if s not in params]
    angles = _angles(gens, variables)
    for degree in range(1, budget + 1):
        if len(result) == count:
            break
        monomials = _monomials(variables, angles, degree)
        if len(monomials) > MAX_ANSATZ_TERMS:
            logger.debug("ansatz of degree %d has %d terms, stopping", degree, len(monomials))
            break
        for phi in _ansatz_kernel(gens, variables, angles, monomials):
            if len(result) == count:
                break
            accept(phi, "polynomial-ansatz")
    if len(result) < count:
        raise IntegralSearchExhausted(
            f"found {len(result)} of {count} first integrals", partial=result.functions
        )
    return result


def contact_coordinates(
    C: ControlSystem,
    names: list[str] | None = None,
    candidates=None,
    degree_budget: int | None = None,
    verdict: GoursatVerdict | None = None,
) -> ContactTransformation:
    """Linearizing contact coordinates of a static feedback linearizable system.

    Args:
        C: the control system
        names: contact variable names in ascending chain order
        candidates: extra first-integral candidates tried before the ansatz
        degree_budget: maximum ansatz degree
        verdict: an already computed SFL verdict for C

    Returns:
        Verified ContactTransformation onto the Brunovsky form of C's signature

    Raises:
        NotStaticFeedbackLinearizable: if C fails the SFL test
        VerificationFailed: if the assembled map is not a contact transformation
    """
    verdict = verdict or sfl_test(C)
    if not verdict.is_sfl:
        raise NotStaticFeedbackLinearizable(f"{C.name} fails: {', '.join(verdict.failures)}")
    flag = verdict.flag
    kappa = verdict.signature
    k = flag.k
    Z = C.drift_field
    tau = C.t
    chart = C.chart
    dt = chart.d(tau)
    fundamental: list[tuple[sp.Expr, int]] = []
    for j in range(1, k):
        rho = kappa.rho[j - 1]
        if rho == 0:
            continue
        integrals = first_integrals(
            flag.intersection(j),
            rho,
            degree_budget,
            candidates,
            exclude=flag.char(j).annihilator(),
        )
        logger.info("order %d fundamental functions: %s", j, integrals.functions)
        fundamental += [(phi, j) for phi in integrals.functions]
    pi = fundamental_bundle(C.distribution, Z, tau, k, pi0=C.control_span, corank=1 + kappa.delta_k)
    top = first_integrals(pi, kappa.delta_k, degree_budget, candidates, exclude=[dt])
    logger.info("order %d fundamental functions: %s", k, top.functions)
    fundamental += [(phi, k) for phi in top.functions]

    brunovsky = build_brunovsky(kappa, names)
    components: dict[sp.Symbol, sp.Expr] = {brunovsky.chart.time: tau}
    records = []
    for (name, chain), (phi, order) in zip(brunovsky.jets.items(), fundamental, strict=True):
        value = phi
        for s, z in enumerate(chain):
            if s > 0:
                value = Z(value)
            components[z] = value
        records.append(FundamentalFunction(name, phi, order))
    transformation = ContactTransformation(chart, brunovsky, components, Z, tau, records, verdict)
    transformation.verify()
    return transformation
