"""Tests for exact linear algebra over rational functions."""

import pytest
import sympy as sp

from errors import LinearSolveFailure
from exprcore import is_zero
from linalg import generic_rank, independent_rows, nullspace, numeric_rank, rref, solve
from probes import get_session

x, y, th = sp.symbols("x y theta")


class TestRank:
    """Test suite for numeric and generic rank."""

    def test_dependent_rows(self):
        """Test that proportional symbolic rows have rank one."""
        assert generic_rank([[x, y], [x**2, x * y]]) == 1

    def test_trig_rows_full_rank(self):
        """Test that a rotation matrix has full rank."""
        rows = [[sp.sin(th), sp.cos(th)], [sp.cos(th), -sp.sin(th)]]
        assert generic_rank(rows) == 2

    def test_empty_matrix(self):
        """Test that an empty matrix has rank zero."""
        assert numeric_rank([], 3) == 0

    def test_independent_rows_prefers_earliest(self):
        """Test that the earliest maximal independent rows are chosen."""
        assert independent_rows([[1, 0], [2, 0], [0, 1]]) == [0, 2]


class TestRowReduction:
    """Test suite for rref, nullspace and solve."""

    def test_rref_of_numbers(self):
        """Test row reduction of a numeric rank one matrix."""
        rows, pivots = rref([[1, 2], [2, 4]])
        assert pivots == (0,)
        assert rows == [[1, 2]]

    def test_rref_records_pivot_denominators(self):
        """Test that symbolic pivots leave their denominators as loci."""
        rref([[x, 1]], origin="test")
        assert any(locus.origin == "test" for locus in get_session().loci)

    def test_nullspace_annihilates_rows(self):
        """Test that every kernel vector is annihilated by the rows."""
        rows = [[x, 1, 0], [0, y, 1]]
        basis = nullspace(rows, 3)
        assert len(basis) == 1
        for row in rows:
            assert is_zero(sum(a * b for a, b in zip(row, basis[0], strict=True)))

    def test_solve(self):
        """Test a particular solution of a square system."""
        assert solve([[1, 1], [1, -1]], [3, 1]) == [2, 1]

    def test_solve_symbolic(self):
        """Test a solve whose coefficients are functions."""
        a, b = solve([[x, 0], [0, y]], [x * y, y])
        assert is_zero(a - y)
        assert is_zero(b - 1)

    def test_inconsistent_system_raises(self):
        """Test that an inconsistent system raises LinearSolveFailure."""
        with pytest.raises(LinearSolveFailure):
            solve([[1, 1], [1, 1]], [1, 2])
