"""Tests for first integrals and linearizing contact coordinates."""

import pytest
import sympy as sp

from contact import contact_coordinates, first_integrals, fundamental_bundle
from errors import (
    IntegralSearchExhausted,
    NotIntegrable,
    NotStaticFeedbackLinearizable,
    ZTauNotOne,
)
from exprcore import is_zero, t
from geometry import Chart, Distribution

x, y, z = sp.symbols("x y z")
CHART = Chart.build(t, [x, y, z])


class TestFirstIntegrals:
    """Test suite for first_integrals."""

    def test_coordinates_then_ansatz(self):
        """Test that untouched coordinates come first and the ansatz supplies the rest."""
        X = CHART.field({x: 1, y: 1})
        basis = first_integrals(Distribution([X]), 3, degree_budget=2)
        assert basis.functions[:2] == [t, z]
        assert basis.methods == ["coordinate", "coordinate", "polynomial-ansatz"]
        assert is_zero(X(basis.functions[2]))
        assert not basis.functions[2].is_number

    def test_candidates_tried_before_ansatz(self):
        """Test that a supplied candidate is accepted when it is an integral."""
        X = CHART.field({x: 1, y: 1})
        basis = first_integrals(Distribution([X]), 3, degree_budget=2, candidates=[x - y])
        assert basis.functions[2] == x - y
        assert basis.methods[2] == "user-supplied"

    def test_exhausted_search_keeps_partial_basis(self):
        """Test that asking for too many integrals reports what was found."""
        X = CHART.field({x: 1, y: 1})
        with pytest.raises(IntegralSearchExhausted) as excinfo:
            first_integrals(Distribution([X]), 4, degree_budget=2)
        assert len(excinfo.value.partial) == 3

    def test_non_integrable_distribution(self):
        """Test that a contact plane has no complete set of first integrals."""
        D = Distribution([CHART.partial(y), CHART.field({x: 1, z: y})])
        with pytest.raises(NotIntegrable):
            first_integrals(D, 2)


class TestContactCoordinates:
    """Test suite for contact_coordinates."""

    def test_double_integrator(self, chained_integrator):
        """Test that x1 is the fundamental function and its drift derivatives follow."""
        phi = contact_coordinates(chained_integrator, ["z"])
        assert phi.items() == [("t", "t"), ("z", "x1"), ("z1", "x2"), ("z2", "u")]
        assert [ff.name for ff in phi.fundamental] == ["z"]
        assert phi.fundamental[0].order == 2

    def test_hsm_fundamental_functions(self, hsm_system):
        """Test the two fundamental functions of the five-state example."""
        phi = contact_coordinates(hsm_system, ["z1", "z2"])
        values = {s.name: e for s, e in phi.components.items()}
        x1, x2, x4, x5 = sp.symbols("x1 x2 x4 x5")
        assert is_zero(values["z1"] - x4)
        assert is_zero(values["z1_1"] - (x5 + x4**3 - x1**10))
        assert is_zero(values["z2"] - x1)
        assert is_zero(values["z2_1"] - sp.sin(x2))

    def test_not_sfl_raises(self, charlet_system):
        """Test that a system failing the SFL test has no contact coordinates."""
        with pytest.raises(NotStaticFeedbackLinearizable):
            contact_coordinates(charlet_system)


class TestFundamentalBundle:
    """Test suite for fundamental_bundle."""

    def test_double_integrator(self, chained_integrator):
        """Test that Pi is spanned by d_u and d_x2."""
        x2, u = sp.symbols("x2 u")
        C = chained_integrator
        pi = fundamental_bundle(C.distribution, C.drift_field, t, 2, corank=2)
        assert pi.rank == 2
        assert pi.contains(C.chart.partial(u))
        assert pi.contains(C.chart.partial(x2))

    def test_time_integral_required(self, chained_integrator):
        """Test that Z(tau) must be identically one."""
        C = chained_integrator
        with pytest.raises(ZTauNotOne):
            fundamental_bundle(C.distribution, C.drift_field, sp.Symbol("x1"), 2)
