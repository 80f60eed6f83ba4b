"""Unit tests for ultrametric_wreath.ultrametric module.

Tests cover:
- Construction from matrices and pair maps with exact rationals
- Axiom validation naming offending tuples
- Open balls, isometry groups and homogeneous components
- Wideness and discreteness predicates
"""

from fractions import Fraction

import pytest

from ultrametric_wreath.errors import NotAComponent, OrderGuardExceeded, UnknownPoint
from ultrametric_wreath.permgroup import stabilizer
from ultrametric_wreath.ultrametric import (
    UltraSpace,
    as_rational,
    ball,
    component_distance,
    components,
    is_exact,
    is_homogeneous,
    is_r_discrete,
    iso_group,
    iso_group_brute,
    max_discrete_subset,
    validate_space,
    wideness_profile,
)


class TestConstruction:
    """Tests for UltraSpace construction."""

    def test_rational_strings(self):
        """Test that 'p/q' strings parse exactly."""
        assert as_rational("3/4") == Fraction(3, 4)

    def test_float_rejected(self):
        """Test that floating point distances are refused."""
        with pytest.raises(TypeError):
            as_rational(0.5)

    def test_from_pairs_is_symmetric(self, u1):
        """Test that pair distances fill both triangles."""
        assert u1.d("b", "a") == u1.d("a", "b") == 1
        assert u1.d("a", "d") == 2

    def test_missing_pair(self):
        """Test that a missing pair without a default raises ValueError."""
        with pytest.raises(ValueError, match="missing distance"):
            UltraSpace.from_pairs("abc", {("a", "b"): 1})

    def test_non_square_matrix(self):
        """Test that a ragged matrix raises ValueError."""
        with pytest.raises(ValueError, match="square"):
            UltraSpace.from_matrix(["a", "b"], [[0, 1]])

    def test_unknown_point(self, u1):
        """Test that a distance to a foreign point raises UnknownPoint."""
        with pytest.raises(UnknownPoint):
            u1.d("a", "z")

    def test_distance_set(self, u1):
        """Test the sorted distinct nonzero distances."""
        assert u1.distance_set == (Fraction(1), Fraction(2))


class TestValidateSpace:
    """Tests for validate_space()."""

    def test_u1_is_valid(self, u1):
        """Test that the worked space passes every axiom."""
        report = validate_space(u1)
        assert report.ok
        assert report.violations == []

    def test_strong_triangle_violation(self):
        """Test that a broken strong triangle inequality names the triple."""
        U = UltraSpace.from_pairs("abc", {("a", "b"): 1, ("b", "c"): 1, ("a", "c"): 2})
        report = validate_space(U)
        assert not report.ok
        axioms = {v.axiom for v in report.violations}
        assert axioms == {"strong-triangle"}
        assert report.violations[0].where == ["a", "b", "c"]

    def test_asymmetric_and_zero(self):
        """Test that symmetry and positivity violations are both reported."""
        U = UltraSpace.from_matrix(["a", "b"], [[0, 1], [2, 0]])
        assert {v.axiom for v in validate_space(U).violations} == {"symmetry"}
        Z = UltraSpace.from_matrix(["a", "b"], [[0, 0], [0, 0]])
        assert {v.axiom for v in validate_space(Z).violations} == {"positivity"}


class TestBall:
    """Tests for ball()."""

    @pytest.mark.parametrize(
        "radius, expected",
        [(1, ("a",)), (2, ("a", "b")), (3, ("a", "b", "c", "d")), ("3/2", ("a", "b"))],
    )
    def test_open_balls(self, u1, radius, expected):
        """Test open balls around a in the worked space."""
        assert ball(u1, "a", radius) == expected

    def test_non_positive_radius(self, u1):
        """Test that a zero radius raises ValueError."""
        with pytest.raises(ValueError):
            ball(u1, "a", 0)


class TestIsoGroup:
    """Tests for iso_group() and components."""

    def test_u1_order(self, u1):
        """Test that the worked space has 8 isometries."""
        assert iso_group(u1).order == 8

    def test_matches_brute_force(self, u2):
        """Test backtracking against the plain permutation filter."""
        assert iso_group(u2).same_elements(iso_group_brute(u2))

    def test_stabilizer_in_u1(self, u1):
        """Test that fixing a point leaves only the swap of c and d."""
        G = stabilizer(iso_group(u1), "a")
        assert G.order == 2
        assert sorted(g.one_line() for g in G.elements)[1] == ["a", "b", "d", "c"]

    def test_order_guard(self, u1):
        """Test that a tight guard raises OrderGuardExceeded."""
        with pytest.raises(OrderGuardExceeded):
            iso_group(u1, max_order=4)

    def test_u1_homogeneous(self, u1):
        """Test that the worked space is a single component."""
        assert components(u1) == [("a", "b", "c", "d")]
        assert is_homogeneous(u1)
        assert is_exact(u1)

    def test_u2_components(self, u2):
        """Test the two components of the non-homogeneous space."""
        assert components(u2) == [("a", "b"), ("c",)]
        assert not is_homogeneous(u2)

    def test_component_distance(self, u2):
        """Test the minimum cross distance with its witnessing pair."""
        pair = component_distance(u2, ["a", "b"], ["c"])
        assert pair.distance == 2
        assert pair.witness == ("a", "c")

    def test_component_distance_rejects_non_orbit(self, u2):
        """Test that a point set that is no orbit raises NotAComponent."""
        with pytest.raises(NotAComponent):
            component_distance(u2, ["a"], ["c"])


class TestWideness:
    """Tests for discreteness and wideness predicates."""

    def test_max_discrete_subset(self, u1):
        """Test the largest 2-discrete subset is canonical and of size 2."""
        assert max_discrete_subset(u1, 2) == ("a", "c")

    def test_profile_m2(self, u1):
        """Test that both distances admit a 2-point discrete subset."""
        assert wideness_profile(u1, 2) == {Fraction(1): True, Fraction(2): True}

    def test_profile_m3(self, u1):
        """Test that no distance admits three equidistant points."""
        assert wideness_profile(u1, 3) == {Fraction(1): False, Fraction(2): False}

    def test_r_discrete(self, two_points, u1):
        """Test is_r_discrete on a 2-point space and on the worked space."""
        assert is_r_discrete(two_points, 1)
        assert not is_r_discrete(u1, 2)
