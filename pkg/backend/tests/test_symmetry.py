"""Tests for symmetry algebras, quotients and the contact sub-connection."""

import pytest
import sympy as sp

from contact import contact_coordinates
from errors import LinearSolveFailure, NormalFormViolation, VerificationFailed
from exprcore import is_zero, t
from flags import Signature
from geometry import Chart
from symmetry import (
    SymmetryAlgebra,
    build_subconnection,
    check_control_admissible,
    check_epsilon,
    derive_epsilon,
    group_names,
    quotient_system,
    trivialize,
    verify_trivialization,
)

x1, x2, x3, x4, u1, u2 = sp.symbols("x1 x2 x3 x4 u1 u2")
z, z1, w, w1, w2, eps = sp.symbols("z z1 w w1 w2 eps")
CHARLET_INVARIANTS = {"q1": x1, "q2": x2, "q3": x3, "v1": u1, "v2": u2}


@pytest.fixture
def translation(charlet_system):
    return SymmetryAlgebra([charlet_system.chart.partial(x4)], ["X1"])


@pytest.fixture
def charlet_subconnection():
    return build_subconnection(Signature.of(1, 1), ["z", "w"], ["eps"], [z * (1 - w2)])


class TestSymmetryAlgebra:
    """Test suite for SymmetryAlgebra."""

    def test_translation_is_abelian(self, translation):
        """Test dimension and commutativity of a single translation."""
        assert translation.dim == 1
        assert translation.abelian

    def test_structure_constants(self):
        """Test [d_x, x d_x + y d_y] = d_x."""
        x, y = sp.symbols("x y")
        chart = Chart.build(t, [x, y])
        gamma = SymmetryAlgebra([chart.partial(x), chart.field({x: x, y: y})])
        assert not gamma.abelian
        assert gamma.structure_constants[(0, 1)] == [1, 0]

    def test_non_constant_structure_constants(self):
        """Test that brackets with non-constant coefficients are rejected."""
        x, y = sp.symbols("x y")
        chart = Chart.build(t, [x, y])
        with pytest.raises(LinearSolveFailure):
            SymmetryAlgebra([chart.partial(x), chart.field({y: x**2})])

    def test_dependent_generators(self, charlet_system):
        """Test that pointwise dependent generators are rejected."""
        X = charlet_system.chart.partial(x4)
        with pytest.raises(ValueError):
            SymmetryAlgebra([X, X.scale(2)])


class TestAdmissibility:
    """Test suite for check_control_admissible."""

    def test_translation_is_admissible(self, charlet_system, translation):
        """Test every admissibility condition for the x4 translation."""
        report = check_control_admissible(charlet_system, translation)
        assert report.admissible
        assert len(report.conditions) == 5

    def test_non_symmetry_rejected(self, charlet_system):
        """Test that a field not preserving V fails the symmetry condition."""
        gamma = SymmetryAlgebra([charlet_system.chart.field({x4: x1})])
        report = check_control_admissible(charlet_system, gamma)
        assert not report.admissible
        assert "generators are symmetries of V" in report.failures


class TestQuotient:
    """Test suite for quotient_system."""

    def test_supplied_invariants(self, charlet_system, translation):
        """Test the quotient written in supplied invariants."""
        quotient = quotient_system(charlet_system, translation, CHARLET_INVARIANTS)
        assert quotient.system.equations() == {"q1'": "q2", "q2'": "v1", "q3'": "v2"}
        assert quotient.methods == ["user-supplied"] * 5

    def test_searched_invariants(self, charlet_system, translation):
        """Test that the invariant search finds the untouched coordinates."""
        quotient = quotient_system(charlet_system, translation)
        assert quotient.system.equations() == {"q1'": "q2", "q2'": "v1", "q3'": "v2"}
        assert set(quotient.methods) == {"coordinate"}

    def test_non_invariant_rejected(self, charlet_system, translation):
        """Test that a function moved by the group is not accepted as an invariant."""
        invariants = dict(CHARLET_INVARIANTS, q3=x4)
        with pytest.raises(VerificationFailed):
            quotient_system(charlet_system, translation, invariants)

    def test_scaling_quotient(self):
        """Test the quotient of a scaling symmetry in ratio invariants."""
        from geometry import ControlSystem

        x5 = sp.Symbol("x5")
        C = ControlSystem.from_equations(
            [x1, x2, x3, x4, x5],
            [u1, u2],
            [x5 * x3 + x2, x5 * x1 + x3, u1, x5, u2],
        )
        gamma = SymmetryAlgebra([C.chart.field({x1: x1, x2: x2, x3: x3, u1: u1})])
        invariants = {"q1": x2 / x1, "q2": x3 / x1, "q3": x4, "q4": x5, "v1": u1 / x1, "v2": u2}
        quotient = quotient_system(C, gamma, invariants)
        q1, q2, q4, v1 = sp.symbols("q1 q2 q4 v1")
        drift = dict(zip(quotient.system.states, quotient.system.drift, strict=True))
        assert is_zero(drift[q1] + (q1 * q2 * q4 + q1**2 - q2 - q4))
        assert is_zero(drift[q2] + (q2**2 * q4 + q1 * q2 - v1))


class TestGroupCoordinates:
    """Test suite for group coordinates."""

    def test_group_names(self):
        """Test single and numbered group coordinate names."""
        assert group_names(1) == ["eps"]
        assert group_names(2) == ["eps1", "eps2"]

    def test_derived_translation_coordinate(self, charlet_system, translation):
        """Test that the translated state is its own group coordinate."""
        assert derive_epsilon(charlet_system, translation) == [x4]

    def test_control_dependent_coordinate_rejected(self, charlet_system, translation):
        """Test that group coordinates may not depend on the controls."""
        with pytest.raises(NormalFormViolation):
            check_epsilon(charlet_system, translation, [x4 + u1])


class TestSubConnection:
    """Test suite for the contact sub-connection."""

    def test_build(self, charlet_subconnection):
        """Test the chart and coefficients of a hand-written sub-connection."""
        H = charlet_subconnection
        assert str(H.signature) == "<1,1>"
        assert [s.name for s in H.system.states] == ["z", "w", "w1", "eps"]
        assert [s.name for s in H.system.controls] == ["z1", "w2"]
        assert is_zero(H.lambdas[eps] - z * (1 - w2))

    def test_group_dependent_coefficient_rejected(self):
        """Test that coefficients must be free of the group coordinates."""
        with pytest.raises(NormalFormViolation):
            build_subconnection(Signature.of(1, 1), ["z", "w"], ["eps"], [eps * z])

    def test_trivialize(self, charlet_system, translation):
        """Test the computed trivialization and its coefficient z (1 - w2)."""
        quotient = quotient_system(charlet_system, translation, CHARLET_INVARIANTS)
        phi = contact_coordinates(quotient.system, ["z", "w"])
        H = trivialize(charlet_system, translation, quotient, phi)
        assert is_zero(H.lambdas[eps] - z * (1 - w2))
        components = {s.name: e for s, e in H.trivialization.components.items()}
        assert components["w"] == x1
        assert components["z"] == x3
        assert components["eps"] == x4

    def test_verify_supplied_map(self, charlet_system, translation, charlet_subconnection):
        """Test that jets missing from a supplied map are filled along the drift."""
        H = verify_trivialization(
            charlet_system,
            translation,
            {"z": x3, "w": x1, "eps": x4},
            charlet_subconnection,
        )
        components = {s.name: e for s, e in H.trivialization.components.items()}
        assert components["w1"] == x2
        assert components["w2"] == u1

    def test_verify_rejects_wrong_coefficients(self, charlet_system, translation):
        """Test that a map onto the wrong sub-connection fails verification."""
        wrong = build_subconnection(Signature.of(1, 1), ["z", "w"], ["eps"], [z])
        with pytest.raises(VerificationFailed):
            verify_trivialization(charlet_system, translation, {"z": x3, "w": x1, "eps": x4}, wrong)

    def test_non_abelian_trivialization_rejected(self):
        """Test that computing a trivialization for a non-abelian algebra names the way out."""
        from geometry import ControlSystem

        x, y, u = sp.symbols("x y u")
        C = ControlSystem.from_equations([x, y], [u], [y, u])
        gamma = SymmetryAlgebra([C.chart.partial(x), C.chart.field({x: x, y: y})])
        with pytest.raises(ValueError, match="abelian symmetry algebra; for other groups"):
            trivialize(C, gamma, None, None)
