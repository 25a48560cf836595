"""Tests for signatures, derived flags and refined derived types."""

import random

import pytest
import sympy as sp

from exprcore import t
from flags import Signature, cauchy_bundle, derived_flag, refined_derived_type, vel_decel
from geometry import Chart, CoordinateMap, Distribution, pushforward
from system_file import SystemFileParser

x, y, z = sp.symbols("x y z")


class TestSignature:
    """Test suite for Signature."""

    def test_str_and_orders(self):
        """Test printing and the ascending chain orders."""
        kappa = Signature.of(0, 1, 1)
        assert str(kappa) == "<0,1,1>"
        assert kappa.orders() == [2, 3]
        assert kappa.k == 3
        assert kappa.width == 2

    def test_jet_dimension(self):
        """Test dim J^kappa = 1 + sum (1 + i) rho_i."""
        assert Signature.of(0, 1, 1).jet_dim() == 8
        assert Signature.of(1, 1).jet_dim() == 6

    def test_from_orders(self):
        """Test building a signature from chain orders."""
        assert Signature.from_orders([1, 2]) == Signature((1, 1))
        assert Signature.from_orders([3, 3]).is_equal_order()
        assert Signature.from_orders([3, 3]).delta_k == 2

    def test_trimmed_and_validity(self):
        """Test that trailing zeros are trimmed and only trimmed signatures are valid."""
        assert Signature.of(1, 0, 0) == Signature((1,))
        assert Signature((0, 1)).is_valid
        assert not Signature((1, 0)).is_valid

    def test_sum_and_join(self):
        """Test entrywise sum and the join of jet spaces."""
        assert Signature.of(0, 1) + Signature.of(1) == Signature((1, 1))
        assert Signature.of(1).join(Signature.of(0, 1)) == Signature((0, 1))
        assert Signature.of(1).leq(Signature.of(0, 1))
        assert not Signature.of(0, 1).leq(Signature.of(1))


class TestDerivedFlag:
    """Test suite for derived flags of control systems."""

    def test_double_integrator_flag(self, chained_integrator):
        """Test ranks, velocity and deceleration of x1' = x2, x2' = u."""
        flag = derived_flag(chained_integrator.distribution)
        assert flag.ranks == [2, 3, 4]
        assert flag.k == 2
        assert flag.reaches_tangent_bundle
        velocity, decel = vel_decel(flag)
        assert str(velocity) == "<1,1>"
        assert str(decel) == "<0,1>"

    def test_double_integrator_refined_type(self, chained_integrator):
        """Test the refined derived type of the double integrator."""
        refined = refined_derived_type(chained_integrator.distribution)
        assert refined.as_lists() == [[2, 0], [3, 1, 1], [4, 4]]
        assert str(refined) == "[[2,0],[3,1,1],[4,4]]"

    def test_cauchy_bundle_of_involutive_span(self):
        """Test that an integrable distribution is its own Cauchy bundle."""
        chart = Chart.build(t, [x, y, z])
        D = Distribution([chart.partial(x), chart.partial(y)])
        assert cauchy_bundle(D).rank == 2

    def test_contact_plane_has_trivial_cauchy_bundle(self):
        """Test that the contact plane span{d_y, d_x + y d_z} has no Cauchy characteristics."""
        chart = Chart.build(t, [x, y, z])
        D = Distribution([chart.partial(y), chart.field({x: 1, z: y})])
        assert cauchy_bundle(D).rank == 0


def triangular_map(C, rng: random.Random) -> CoordinateMap:
    """y_i = x_i + integer polynomial in the earlier coordinates, controls last"""
    source = list(C.states) + list(C.controls)
    states = [sp.Symbol(f"y{i + 1}") for i in range(len(C.states))]
    controls = [sp.Symbol(f"v{i + 1}") for i in range(len(C.controls))]
    target = Chart.build(t, states, controls)
    components = {t: t}
    for i, (x_i, y_i) in enumerate(zip(source, states + controls, strict=True)):
        earlier = source[:i]
        terms = earlier + [a * b for a in earlier for b in earlier]
        components[y_i] = x_i + sum(rng.randint(-2, 2) * m for m in terms)
    return CoordinateMap(C.chart, target, components)


class TestInvariance:
    """Test suite for properties every derived flag must have."""

    @pytest.mark.slow
    def test_refined_type_under_triangular_maps(self, charlet_system):
        """Test that the refined derived type does not depend on the coordinates."""
        rng = random.Random(20240517)
        expected = refined_derived_type(charlet_system.distribution)
        for _ in range(20):
            phi = triangular_map(charlet_system, rng)
            image = Distribution(
                [pushforward(phi, X) for X in charlet_system.distribution.generators], phi.target
            )
            assert refined_derived_type(image) == expected

    @pytest.mark.parametrize(
        "name",
        [
            "hsm.sys",
            "charlet.sys",
            "marino.sys",
            pytest.param("tvtol.sys", marks=pytest.mark.slow),
            pytest.param("pvtol_galilean.sys", marks=pytest.mark.slow),
            pytest.param("pvtol.sys", marks=pytest.mark.slow),
        ],
    )
    def test_cauchy_bundles_are_involutive(self, corpus_dir, name):
        """Test that each derived flag level of a corpus system has an involutive Cauchy bundle."""
        C = SystemFileParser().parse_file(str(corpus_dir / name)).system()
        for level in derived_flag(C.distribution).levels:
            assert cauchy_bundle(level).is_involutive()
