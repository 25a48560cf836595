"""Tests for Brunovsky forms and the Goursat, SFL and relative Goursat tests."""

import random

import pytest
import sympy as sp

from errors import NotStronglyTransverse
from flags import Signature
from goursat import build_brunovsky, goursat_test, jet_name, relative_goursat_test, sfl_test
from symmetry import SymmetryAlgebra


class TestBrunovskyForm:
    """Test suite for the Brunovsky normal form."""

    def test_jet_names(self):
        """Test jet naming with and without a trailing digit."""
        assert jet_name("w", 0) == "w"
        assert jet_name("z", 2) == "z2"
        assert jet_name("z1", 2) == "z1_2"

    def test_mixed_order_chart(self):
        """Test the jet chart of <1,1> with custom names."""
        B = build_brunovsky(Signature.of(1, 1), ["z", "w"])
        assert [s.name for s in B.chart.symbols] == ["t", "z", "z1", "w", "w1", "w2"]
        assert [s.name for s in B.tops()] == ["z1", "w2"]
        assert len(B.pfaffian) == 3
        assert B.distribution.rank == 3

    def test_default_names(self):
        """Test that contact variables default to z1, z2, ..."""
        B = build_brunovsky(Signature.of(0, 2))
        assert list(B.jets) == ["z1", "z2"]

    def test_name_count_checked(self):
        """Test that the number of names must match the number of chains."""
        with pytest.raises(ValueError):
            build_brunovsky(Signature.of(0, 2), ["z"])

    def test_normal_form_is_sfl(self):
        """Test that a Brunovsky form read as a control system passes the SFL test."""
        B = build_brunovsky(Signature.of(0, 1), ["w"])
        verdict = sfl_test(B.as_control_system())
        assert verdict.is_sfl
        assert str(verdict.signature) == "<0,1>"


class TestGoursatTests:
    """Test suite for goursat_test and sfl_test."""

    def test_double_integrator_is_sfl(self, chained_integrator):
        """Test the SFL verdict and its recorded conditions."""
        verdict = sfl_test(chained_integrator)
        assert verdict.is_sfl
        assert verdict.is_goursat
        assert verdict.failures == []
        assert all(verdict.conditions.values())
        assert verdict.refined_type.as_lists() == [[2, 0], [3, 1, 1], [4, 4]]

    def test_goursat_test_without_drift(self, chained_integrator):
        """Test the plain Goursat test on a delta_k = 1 bundle."""
        verdict = goursat_test(chained_integrator.distribution)
        assert verdict.is_goursat
        assert verdict.delta_k == 1

    def test_hsm_refined_type(self, hsm_system):
        """Test the refined derived type and signature of the five-state example."""
        verdict = sfl_test(hsm_system)
        assert verdict.is_sfl
        assert verdict.refined_type.as_lists() == [[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]]
        assert str(verdict.signature) == "<0,1,1>"

    def test_charlet_is_not_sfl(self, charlet_system):
        """Test that a negative verdict is returned as a value with named failures."""
        verdict = sfl_test(charlet_system)
        assert verdict.is_sfl is False
        assert verdict.failures


class TestRelativeGoursat:
    """Test suite for relative_goursat_test."""

    def test_translation_symmetry(self, charlet_system):
        """Test the quotient signature predicted for the x4 translation."""
        x4 = sp.Symbol("x4")
        gamma = SymmetryAlgebra([charlet_system.chart.partial(x4)])
        verdict = relative_goursat_test(charlet_system, gamma.distribution)
        assert verdict.is_sfl
        assert str(verdict.signature) == "<1,1>"

    def test_not_strongly_transverse(self, charlet_system):
        """Test that a symmetry inside V^(1) is rejected."""
        x3 = sp.Symbol("x3")
        gamma = SymmetryAlgebra([charlet_system.chart.partial(x3)])
        with pytest.raises(NotStronglyTransverse):
            relative_goursat_test(charlet_system, gamma.distribution)


def random_signature(rng: random.Random) -> Signature:
    """At most three chains of order at most three"""
    while True:
        k = rng.randint(1, 3)
        rho = [rng.randint(0, 2) for _ in range(k - 1)] + [rng.randint(1, 2)]
        if sum(rho) <= 3:
            return Signature.of(*rho)


class TestBrunovskySweep:
    """Test suite for recovering signatures of Brunovsky normal forms."""

    @pytest.mark.slow
    def test_random_signatures(self):
        """Test that sfl_test returns kappa for the normal form of 50 random kappa."""
        rng = random.Random(20240517)
        for _ in range(50):
            kappa = random_signature(rng)
            verdict = sfl_test(build_brunovsky(kappa).as_control_system())
            assert verdict.is_sfl, str(kappa)
            assert str(verdict.signature) == str(kappa)
