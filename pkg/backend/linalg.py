"""Exact linear algebra over the rational-function field of the coordinates.

Rank questions are answered numerically at seeded probe points and cross-checked against a
symbolic reduced row echelon form computed with SymPy's ``DomainMatrix``. Trig pairs enter the
symbolic computation through the rational circle parametrisation, so the field stays purely
rational and elimination is exact.
"""

import logging
from collections.abc import Sequence

import sympy as sp
from sympy.polys.matrices import DomainMatrix

from config import config
from errors import LinearSolveFailure, PoleAtPoint, RankDisagreement
from exprcore import Extension, evaluate_lifted, normalize
from probes import get_session

logger = logging.getLogger(__name__)

Rows = Sequence[Sequence[sp.Expr]]


def _lift_rows(rows: Rows) -> tuple[Extension, list[list[sp.Expr]]]:
    ext = Extension()
    return ext, [[ext.lift(e) for e in row] for row in rows]


def _numeric_matrix(ext: Extension, lifted: list[list[sp.Expr]]) -> list[list[sp.Rational]]:
    symbols = set()
    for row in lifted:
        for e in row:
            symbols |= e.free_symbols
    for _ in range(config.PROBE_RETRIES):
        point = ext.random_point(symbols)
        try:
            return [[evaluate_lifted(e, point) for e in row] for row in lifted]
        except PoleAtPoint:
            logger.debug("pole hit while evaluating a matrix, drawing a new point")
    raise PoleAtPoint("retry budget exhausted while evaluating a matrix")


def _rank_of_numbers(values: list[list[sp.Rational]], ncols: int) -> int:
    if not values or ncols == 0:
        return 0
    return DomainMatrix.from_list_sympy(len(values), ncols, values).rank()


def _pivot_rows(values: list[list[sp.Rational]], ncols: int) -> list[int]:
    """Indices of a maximal independent set of rows, earliest rows preferred"""
    if not values or ncols == 0:
        return []
    transposed = [[values[i][j] for i in range(len(values))] for j in range(ncols)]
    _, pivots = DomainMatrix.from_list_sympy(ncols, len(values), transposed).to_field().rref()
    return list(pivots)


def _width(rows: Rows, ncols: int | None) -> int:
    if ncols is not None:
        return ncols
    return len(rows[0]) if rows else 0


def numeric_rank(rows: Rows, ncols: int | None = None) -> int:
    """Maximum rank over the configured number of probe points"""
    ncols = _width(rows, ncols)
    if not rows or ncols == 0:
        return 0
    ext, lifted = _lift_rows(rows)
    best = 0
    for _ in range(config.RANK_POINTS):
        best = max(best, _rank_of_numbers(_numeric_matrix(ext, lifted), ncols))
        if best == min(len(rows), ncols):
            break
    return best


def independent_rows(rows: Rows, ncols: int | None = None) -> list[int]:
    """Earliest maximal set of generically independent rows"""
    ncols = _width(rows, ncols)
    if not rows or ncols == 0:
        return []
    ext, lifted = _lift_rows(rows)
    best: list[int] = []
    for _ in range(config.RANK_POINTS):
        chosen = _pivot_rows(_numeric_matrix(ext, lifted), ncols)
        if len(chosen) > len(best):
            best = chosen
        if len(best) == min(len(rows), ncols):
            break
    return best


def rref(rows: Rows, ncols: int | None = None, origin: str = "rref"):
    """Symbolic reduced row echelon form of the row space.

    Returns:
        Tuple of (nonzero reduced rows as normalized Exprs, pivot column indices)
    """
    ncols = _width(rows, ncols)
    if not rows or ncols == 0:
        return [], ()
    ext, lifted = _lift_rows(rows)
    chosen: list[int] = []
    for _ in range(config.RANK_POINTS):
        picked = _pivot_rows(_numeric_matrix(ext, lifted), ncols)
        if len(picked) > len(chosen):
            chosen = picked
        if len(chosen) == min(len(rows), ncols):
            break
    if not chosen:
        return [], ()
    circled = [[ext.circle(lifted[i][j]) for j in range(ncols)] for i in chosen]
    reduced, pivots = DomainMatrix.from_list_sympy(len(chosen), ncols, circled).to_field().rref()
    if len(pivots) != len(chosen):
        raise RankDisagreement(
            f"numeric rank {len(chosen)} but symbolic rank {len(pivots)} in {origin}"
        )
    matrix = reduced.to_Matrix()
    session = get_session()
    result = []
    for i in range(len(pivots)):
        row = []
        for j in range(ncols):
            entry = normalize(ext.lower(ext.uncircle(matrix[i, j])))
            if not entry.is_number:
                session.record_locus(sp.denom(entry), origin)
            row.append(entry)
        result.append(row)
    return result, tuple(pivots)


def nullspace(rows: Rows, ncols: int, origin: str = "nullspace") -> list[list[sp.Expr]]:
    """Basis of the right kernel, one vector per free column, leading entry scaled to one"""
    reduced, pivots = rref(rows, ncols, origin) if rows else ([], ())
    basis = []
    for free in range(ncols):
        if free in pivots:
            continue
        vector = [sp.Integer(0)] * ncols
        vector[free] = sp.Integer(1)
        for i, p in enumerate(pivots):
            vector[p] = -reduced[i][free]
        lead = next(v for v in vector if v != 0)
        if lead != 1:
            vector = [normalize(v / lead) for v in vector]
        basis.append(vector)
    return basis


def solve(rows: Rows, rhs: Sequence[sp.Expr], origin: str = "solve") -> list[sp.Expr]:
    """Particular solution of rows * x = rhs with every free unknown set to zero"""
    ncols = _width(rows, None)
    augmented = [list(row) + [b] for row, b in zip(rows, rhs, strict=True)]
    reduced, pivots = rref(augmented, ncols + 1, origin)
    if ncols in pivots:
        raise LinearSolveFailure(f"inconsistent linear system in {origin}")
    solution = [sp.Integer(0)] * ncols
    for i, p in enumerate(pivots):
        solution[p] = reduced[i][ncols]
    return solution


def generic_rank(rows: Rows, ncols: int | None = None) -> int:
    """Numeric rank at probe points, cross-checked symbolically when the matrix is small"""
    ncols = _width(rows, ncols)
    rank = numeric_rank(rows, ncols)
    if rank and len(rows) * ncols <= config.SYMBOLIC_RANK_BUDGET:
        _, pivots = rref(rows, ncols, "generic_rank")
        if len(pivots) != rank:
            raise RankDisagreement(f"numeric rank {rank}, symbolic rank {len(pivots)}")
    elif rank:
        logger.debug("symbolic rank check skipped for a %dx%d matrix", len(rows), ncols)
    return rank
