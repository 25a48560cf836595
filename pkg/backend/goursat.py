"""Goursat bundle, static feedback linearizability and relative Goursat tests.

Every test returns a ``GoursatVerdict`` whose ``conditions`` map names each checked property to
its outcome; a negative verdict is a value, not an exception.
"""

import logging
from dataclasses import dataclass, field

import sympy as sp

from errors import DeltaKGreaterThanOne, NotStronglyTransverse
from exprcore import is_zero
from exprcore import t as time_symbol
from flags import (
    DerivedFlag,
    RefinedDerivedType,
    Signature,
    cauchy_bundle,
    derived_flag,
    first_derived,
    refined_derived_type,
    vel_decel,
)
from geometry import (
    Chart,
    ControlSystem,
    Coordinate,
    Distribution,
    OneForm,
    Role,
    VectorField,
    bracket,
    rank_of,
)

logger = logging.getLogger(__name__)


@dataclass
class GoursatVerdict:
    """Outcome of a Goursat, SFL or relative Goursat test"""

    is_goursat: bool
    signature: Signature  # decel of the tested bundle
    delta_k: int
    refined_type: RefinedDerivedType | None = None
    velocity: Signature | None = None
    failures: list[str] = field(default_factory=list)
    conditions: dict[str, bool] = field(default_factory=dict)
    is_sfl: bool | None = None  # set by the SFL and relative tests
    relative: bool = False
    flag: DerivedFlag | None = field(default=None, repr=False)
    fundamental: Distribution | None = field(default=None, repr=False)

    def record(self, name: str, ok: bool):
        self.conditions[name] = ok
        if not ok:
            self.failures.append(name)
            logger.info("condition failed: %s", name)


@dataclass
class BrunovskyForm:
    """Pfaffian system of the mixed-order Brunovsky normal form on J^kappa"""

    signature: Signature
    chart: Chart
    distribution: Distribution  # {D_t, d/dz top jets}
    pfaffian: list[OneForm]  # dz_s - z_(s+1) dt
    total_derivative: VectorField
    jets: dict[str, list[sp.Symbol]]  # variable name -> jets by order

    def tops(self) -> list[sp.Symbol]:
        return [chain[-1] for chain in self.jets.values()]

    def as_control_system(self) -> ControlSystem:
        """The normal form read as z_s' = z_(s+1) with the top jets as controls"""
        tops = set(self.tops())
        states = [s for chain in self.jets.values() for s in chain if s not in tops]
        drift = []
        for chain in self.jets.values():
            drift += chain[1:]
        return ControlSystem.from_equations(
            states, self.tops(), drift, time=self.chart.time, name=f"B{self.signature}"
        )


def jet_name(variable: str, order: int) -> str:
    """Name of the order-th jet of a contact variable: z, z1, z2 or z1, z1_1, z1_2"""
    if order == 0:
        return variable
    sep = "_" if variable[-1].isdigit() else ""
    return f"{variable}{sep}{order}"


def build_brunovsky(kappa: Signature, names: list[str] | None = None) -> BrunovskyForm:
    """Build the Brunovsky form of signature kappa.

    Args:
        kappa: signature with a nonzero last entry
        names: contact variable names in ascending chain order, default z1, z2, ...

    Returns:
        BrunovskyForm on the jet chart (t, chains in ascending order)
    """
    kappa = kappa.trimmed()
    if not kappa.rho:
        raise ValueError("a Brunovsky form needs a nonempty signature")
    orders = kappa.orders()
    if names is None:
        names = [f"z{a + 1}" for a in range(len(orders))]
    if len(names) != len(orders):
        raise ValueError(f"{len(names)} names for {len(orders)} contact variables")
    jets: dict[str, list[sp.Symbol]] = {}
    extra = []
    for name, order in zip(names, orders, strict=True):
        chain = [sp.Symbol(jet_name(name, s)) for s in range(order + 1)]
        jets[name] = chain
        extra += [Coordinate(z, Role.JET, variable=name, order=s) for s, z in enumerate(chain)]
    chart = Chart.build(time=time_symbol, extra=extra)
    components = {chart.time: 1}
    for chain in jets.values():
        for lower, upper in zip(chain, chain[1:], strict=False):
            components[lower] = upper
    total = chart.field(components)
    tops = [chain[-1] for chain in jets.values()]
    distribution = Distribution([total] + [chart.partial(z) for z in tops], chart)
    pfaffian = []
    for chain in jets.values():
        for lower, upper in zip(chain, chain[1:], strict=False):
            coeffs = [sp.Integer(0)] * chart.dim
            coeffs[chart.index(lower)] = sp.Integer(1)
            coeffs[chart.index(chart.time)] = -upper
            pfaffian.append(OneForm(chart, tuple(coeffs)))
    return BrunovskyForm(kappa, chart, distribution, pfaffian, total, jets)


def ad_span(seed: Distribution, Z: VectorField, steps: int) -> Distribution:
    """span{seed, ad(Z) seed, ..., ad(Z)^(steps-1) seed}"""
    gens = seed.basis()
    newest = gens
    for _ in range(steps - 1):
        newest = [bracket(X, Z) for X in newest]
        gens = gens + newest
    return Distribution(gens, seed.chart)


def _type_checks(verdict: GoursatVerdict, flag: DerivedFlag, relative: bool):
    """Relations between the refined derived type and the deceleration"""
    m = flag.ranks
    k = flag.k
    kappa = verdict.signature
    if not relative:
        verdict.record("m0 = 1 + number of chains", m[0] == 1 + kappa.width)
        verdict.record("Cauchy bundle is trivial", flag.char(0).rank == 0)
    for j in range(1, k):
        expected = 2 * m[j] - m[j + 1] - 1
        verdict.record(f"chi^{j} = 2 m_{j} - m_{j + 1} - 1", flag.char(j).rank == expected)
    for i in range(1, k):
        expected = m[i - 1] - 1
        verdict.record(f"chi^{i}_{i - 1} = m_{i - 1} - 1", flag.intersection(i).rank == expected)
    verdict.record(f"chi^{k} = m_{k}", flag.char(k).rank == m[k])
    for i in range(1, k):
        verdict.record(f"Char V^({i})_{i - 1} is integrable", flag.intersection(i).is_involutive())


def _equal_order_check(verdict: GoursatVerdict, flag: DerivedFlag, drift: VectorField | None):
    kappa = verdict.signature
    if kappa.delta_k == 1:
        return
    if not kappa.is_equal_order() or drift is None:
        raise DeltaKGreaterThanOne(
            f"signature {kappa} has delta_k = {kappa.delta_k}; prolong the lower-order chains"
        )
    if flag.k == 1:
        return
    pi = ad_span(flag.intersection(1), drift, flag.k)
    verdict.fundamental = pi
    verdict.record("fundamental bundle is integrable", pi.is_involutive())
    corank = 1 + kappa.delta_k
    verdict.record(f"fundamental bundle has corank {corank}", pi.corank == corank)


def _evaluate(D: Distribution, drift: VectorField | None, relative: bool) -> GoursatVerdict:
    flag = derived_flag(D)
    logger.info("derived flag ranks %s", flag.ranks)
    velocity, decel = vel_decel(flag)
    verdict = GoursatVerdict(
        is_goursat=False,
        signature=decel,
        delta_k=decel.delta_k,
        velocity=velocity,
        relative=relative,
        flag=flag,
    )
    verdict.record("derived flag reaches the tangent bundle", flag.reaches_tangent_bundle)
    verdict.record("deceleration is a signature", decel.is_valid)
    if verdict.failures:
        return verdict
    verdict.refined_type = refined_derived_type(flag)
    _type_checks(verdict, flag, relative)
    _equal_order_check(verdict, flag, drift)
    verdict.is_goursat = not verdict.failures
    return verdict


def goursat_test(D: Distribution, drift: VectorField | None = None) -> GoursatVerdict:
    """Decide whether D is a Goursat bundle.

    Raises:
        DeltaKGreaterThanOne: unless delta_k = 1, or the signature is equal-order and a drift
            field is given for the fundamental bundle check
    """
    verdict = _evaluate(D, drift, relative=False)
    logger.info("Goursat test: %s, signature %s", verdict.is_goursat, verdict.signature)
    return verdict


def _annihilates_dt(D: Distribution) -> bool:
    t = D.chart.time
    return all(is_zero(g.component(t)) for g in D.generators)


def sfl_test(C: ControlSystem) -> GoursatVerdict:
    """Static feedback linearizability of a control system"""
    C.check_regular()
    verdict = goursat_test(C.distribution, drift=C.drift_field)
    if not verdict.is_goursat:
        verdict.is_sfl = False
        return verdict
    flag = verdict.flag
    k = flag.k
    if k >= 2:
        verdict.record("Char V^(1)_0 = span{d/du}", flag.intersection(1).equals(C.control_span))
    if verdict.delta_k == 1:
        verdict.record(f"dt annihilates Char V^({k - 1})", _annihilates_dt(flag.char(k - 1)))
    elif verdict.fundamental is not None:
        ok = _annihilates_dt(verdict.fundamental)
        verdict.record("dt annihilates the fundamental bundle", ok)
    verdict.is_sfl = not verdict.failures
    logger.info("SFL test for %s: %s", C.name, verdict.is_sfl)
    return verdict


def relative_goursat_test(C: ControlSystem, gamma: Distribution) -> GoursatVerdict:
    """Static feedback relative Goursat test of V = C.distribution with respect to gamma.

    The returned signature is the one the quotient system will have.

    Raises:
        NotStronglyTransverse: when gamma meets V^(1)
    """
    V = C.distribution
    V1 = first_derived(V)
    if rank_of(V1.generators + gamma.generators) != V1.rank + gamma.rank:
        raise NotStronglyTransverse(f"rank of V^(1) + gamma is below {V1.rank + gamma.rank}")
    hat = V + gamma
    verdict = _evaluate(hat, C.drift_field, relative=True)
    verdict.record("Char V is trivial", cauchy_bundle(V).rank == 0)
    if verdict.refined_type is None:
        verdict.is_sfl = False
        return verdict
    flag = verdict.flag
    k = flag.k
    verdict.record("d/du lies in Char V^(1)_0", flag.intersection(1).contains_all(C.control_span))
    if verdict.delta_k == 1 and k >= 2:
        verdict.record(f"dt annihilates Char V^({k - 1})", _annihilates_dt(flag.char(k - 1)))
    verdict.is_goursat = not verdict.failures
    verdict.is_sfl = verdict.is_goursat
    logger.info(
        "relative Goursat test: %s, quotient signature %s", verdict.is_sfl, verdict.signature
    )
    return verdict
