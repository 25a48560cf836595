import logging
import random
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

import sympy as sp

from config import config

logger = logging.getLogger(__name__)

MAX_DENOMINATOR = 97
BOUND = 10


@dataclass
class Locus:
    """A denominator whose zero set was excluded by a computation"""

    expr: str  # Printed form of the excluded denominator
    origin: str  # Which computation produced it


@dataclass
class ProbeSession:
    """Seeded source of random rational probe points plus the genericity loci they imply"""

    seed: int
    loci: list[Locus] = field(default_factory=list)

    def __post_init__(self):
        self.rng = random.Random(self.seed)
        self._seen: set[str] = set()
        self.draws = 0

    def rational(self) -> sp.Rational:
        """Random rational in [-10, 10] with denominator at most 97"""
        self.draws += 1
        den = self.rng.randint(1, MAX_DENOMINATOR)
        num = self.rng.randint(-BOUND * den, BOUND * den)
        return sp.Rational(num, den)

    def circle_point(self) -> tuple[sp.Rational, sp.Rational]:
        """Random rational point (sin, cos) on the unit circle"""
        tau = self.rational()
        return 2 * tau / (1 + tau**2), (1 - tau**2) / (1 + tau**2)

    def record_locus(self, expr: sp.Expr, origin: str):
        """Record a non-constant denominator as part of the genericity locus"""
        if expr.is_number:
            return
        printed = sp.sstr(expr)
        if printed in self._seen:
            return
        self._seen.add(printed)
        self.loci.append(Locus(expr=printed, origin=origin))
        logger.debug("genericity locus %s from %s", printed, origin)


_local = threading.local()
_default = ProbeSession(seed=config.SEED)


def get_session() -> ProbeSession:
    """Session of the current thread, falling back to the process-wide one"""
    return getattr(_local, "session", None) or _default


def reset_session(seed: int | None = None) -> ProbeSession:
    """Replace the process-wide session with a fresh one"""
    global _default
    _default = ProbeSession(seed=config.SEED if seed is None else seed)
    _local.session = None
    return _default


@contextmanager
def use_session(session: ProbeSession):
    """Run a block of work against a dedicated session (one per worker thread)"""
    previous = getattr(_local, "session", None)
    _local.session = session
    try:
        yield session
    finally:
        _local.session = previous
