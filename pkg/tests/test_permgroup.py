"""Unit tests for ultrametric_wreath.permgroup module.

Tests verify:
- Permutation construction, composition and serialization
- Closure against sympy's group order
- Orbits, stabilizers and restriction to invariant blocks
- Conjugation witnesses, including failures reported as data
"""

import pytest
from sympy.combinatorics import Permutation as SympyPermutation
from sympy.combinatorics import PermutationGroup

from ultrametric_wreath.errors import (
    DomainMismatch,
    NotInvariant,
    OrderGuardExceeded,
    TooLarge,
    UnknownElement,
)
from ultrametric_wreath.permgroup import (
    GroundSet,
    Permutation,
    brute_filter,
    closure,
    compose_witnesses,
    is_transitive,
    orbits,
    restrict_to_block,
    small_generating_set,
    stabilizer,
    symmetric_group,
    trivial_group,
    verify_conjugation,
    verify_induced_conjugation,
)


@pytest.fixture
def abc() -> GroundSet:
    return GroundSet(("a", "b", "c"))


@pytest.fixture
def abcd() -> GroundSet:
    return GroundSet(("a", "b", "c", "d"))


class TestPermutation:
    """Tests for Permutation and GroundSet."""

    def test_duplicate_ground_elements(self):
        """Test that a ground set with repeated elements raises ValueError."""
        with pytest.raises(ValueError, match="pairwise distinct"):
            GroundSet(("a", "a"))

    def test_unknown_element(self, abc):
        """Test that looking up a foreign element raises UnknownElement."""
        with pytest.raises(UnknownElement):
            abc.position("z")

    def test_not_a_bijection(self, abc):
        """Test that repeated images are rejected."""
        with pytest.raises(ValueError, match="bijection"):
            Permutation(abc, (0, 0, 1))

    def test_compose_applies_right_first(self, abc):
        """Test that compose follows the right-to-left convention."""
        ab = Permutation.from_cycles(abc, [("a", "b")])
        bc = Permutation.from_cycles(abc, [("b", "c")])
        composite = ab.compose(bc)
        assert composite("b") == "c"
        assert composite("c") == "a"
        assert composite("a") == "b"

    def test_inverse(self, abc):
        """Test that g composed with its inverse is the identity."""
        g = Permutation.from_cycles(abc, [("a", "b", "c")])
        assert g.compose(g.inverse()).is_identity()

    def test_one_line(self, abc):
        """Test one-line notation over the canonical ground order."""
        g = Permutation.from_cycles(abc, [("a", "c")])
        assert g.one_line() == ["c", "b", "a"]
        assert g.as_mapping() == {"a": "c", "b": "b", "c": "a"}


class TestClosure:
    """Tests for closure() and group construction helpers."""

    def test_trivial_group_order(self, abc):
        """Test that the trivial group has order 1."""
        assert trivial_group(abc).order == 1

    def test_symmetric_group_order(self, abc):
        """Test that Sym over three points has order 6."""
        assert symmetric_group(abc).order == 6

    def test_closure_matches_sympy(self, abcd):
        """Test a dihedral closure against sympy's order computation."""
        r = Permutation.from_cycles(abcd, [("a", "b", "c", "d")])
        s = Permutation.from_cycles(abcd, [("a", "c")])
        G = closure([r, s])
        reference = PermutationGroup(
            [SympyPermutation(list(r.images)), SympyPermutation(list(s.images))]
        )
        assert G.order == reference.order() == 8

    def test_closure_guard(self, abcd):
        """Test that exceeding max_order raises OrderGuardExceeded."""
        r = Permutation.from_cycles(abcd, [("a", "b", "c", "d")])
        with pytest.raises(OrderGuardExceeded):
            closure([r], max_order=3)

    def test_closure_without_ground(self):
        """Test that an empty generator list needs a ground set."""
        with pytest.raises(DomainMismatch):
            closure([])

    def test_closure_mixed_grounds(self, abc, abcd):
        """Test that generators over different grounds raise DomainMismatch."""
        with pytest.raises(DomainMismatch):
            closure([Permutation.identity(abc), Permutation.identity(abcd)])

    def test_brute_filter_limit(self):
        """Test that the brute oracle refuses grounds above its limit."""
        ground = GroundSet(tuple(range(9)))
        with pytest.raises(TooLarge):
            brute_filter(ground, lambda g: True)

    def test_small_generating_set_spans(self, abcd):
        """Test that the greedy generators regenerate the group."""
        G = brute_filter(abcd, lambda g: g("a") in ("a", "b") and g("b") in ("a", "b"))
        gens = small_generating_set(G)
        assert closure(gens, ground=abcd).same_elements(G)


class TestOrbits:
    """Tests for orbits, stabilizers and restriction."""

    def test_orbits_of_swap(self, abcd):
        """Test that a single transposition has three orbits in canonical order."""
        G = closure([Permutation.from_cycles(abcd, [("b", "c")])])
        assert orbits(G) == [("a",), ("b", "c"), ("d",)]

    def test_stabilizer(self, abc):
        """Test that the stabilizer of a point in Sym(3) has order 2."""
        assert stabilizer(symmetric_group(abc), "a").order == 2

    def test_is_transitive(self, abc):
        """Test transitivity of Sym(3)."""
        assert is_transitive(symmetric_group(abc))

    def test_restrict_non_invariant_block(self, abc):
        """Test that restricting to a non-invariant block raises NotInvariant."""
        with pytest.raises(NotInvariant):
            restrict_to_block(symmetric_group(abc), ["a", "b"])

    def test_restrict_invariant_block(self, abcd):
        """Test the induced action on an invariant block."""
        G = closure([Permutation.from_cycles(abcd, [("a", "b"), ("c", "d")])])
        sub = restrict_to_block(G, ["a", "b"])
        assert sub.order == 2
        assert sub.ground.elements == ("a", "b")


class TestConjugation:
    """Tests for verify_conjugation and verify_induced_conjugation."""

    def test_relabeling_verifies(self, abc):
        """Test that Sym(3) conjugates onto Sym(3) over renamed points."""
        other = GroundSet(("x", "y", "z"))
        w = verify_conjugation(
            symmetric_group(abc), symmetric_group(other), {"a": "x", "b": "y", "c": "z"}
        )
        assert w.verified
        assert w.reason == "ok"
        assert w.inverted().verified

    def test_order_mismatch_is_data(self, abc):
        """Test that differing orders yield an unverified witness, not an exception."""
        w = verify_conjugation(
            symmetric_group(abc), trivial_group(abc), {"a": "a", "b": "b", "c": "c"}
        )
        assert not w.verified
        assert "orders differ" in w.reason

    def test_non_bijective_beta(self, abc):
        """Test that a non-injective beta is rejected."""
        w = verify_conjugation(
            symmetric_group(abc), symmetric_group(abc), {"a": "a", "b": "a", "c": "c"}
        )
        assert not w.verified

    def test_wrong_beta_names_failure(self, abcd):
        """Test that a beta breaking the structure reports a failing element."""
        G = closure([Permutation.from_cycles(abcd, [("a", "b")])])
        H = closure([Permutation.from_cycles(abcd, [("c", "d")])])
        w = verify_conjugation(G, H, {"a": "a", "b": "c", "c": "b", "d": "d"})
        assert not w.verified
        assert w.failure is not None

    def test_induced_conjugation(self, abc):
        """Test conjugation into a faithful invariant block of a larger ground."""
        big = GroundSet(("a", "b", "c", "ab"))
        H = closure([Permutation.from_cycles(big, [("a", "b")])])
        G = closure([Permutation.from_cycles(abc, [("a", "b")])])
        w = verify_induced_conjugation(G, H, {"a": "a", "b": "b", "c": "c"})
        assert w.verified
        assert w.induced
        with pytest.raises(ValueError):
            w.inverted()

    def test_compose_witnesses(self, abc):
        """Test that composing two plain witnesses verifies the composite."""
        mid = GroundSet(("p", "q", "r"))
        end = GroundSet(("x", "y", "z"))
        first = verify_conjugation(
            symmetric_group(abc), symmetric_group(mid), {"a": "p", "b": "q", "c": "r"}
        )
        second = verify_conjugation(
            symmetric_group(mid), symmetric_group(end), {"p": "z", "q": "y", "r": "x"}
        )
        composite = compose_witnesses(first, second)
        assert composite.verified
        assert composite.beta == {"a": "z", "b": "y", "c": "x"}
