"""Unit tests for ultrametric_wreath.pipelines module.

Tests verify:
- The labeling construction and the order-isomorphism transfer
- The homogeneous, discrete, general and exact pipelines on the worked spaces
- Rebuilding a space from a skeleton and the Urysohn-style diagnostics
- The wreath product to tree round trip
"""

from fractions import Fraction

import pytest

from ultrametric_wreath.errors import (
    BlockMismatch,
    ClassMismatch,
    MissingLevels,
    NotLinear,
    NotOrderIso,
    NotProper,
    NotUpwardClosed,
)
from ultrametric_wreath.functors import canonical_levels, functor_f
from ultrametric_wreath.ltree import LinearOrder, LTree, condense, label_N
from ultrametric_wreath.pipelines import (
    is_quasi_maximal,
    labeling,
    lemma_g_iso,
    roundtrip_wreath,
    simplify_skeleton,
    space_digest,
    space_from_skeleton,
    urysohn_diagnostics,
    verify_discrete_homogeneous,
    verify_exact,
    verify_general,
    verify_homogeneous,
)
from ultrametric_wreath.skeleton import SeqOver, Skeleton
from ultrametric_wreath.ultrametric import UltraSpace, iso_group
from ultrametric_wreath.wreath import ProjectionSystem, SkeletonBundle

BOTTOM = "[{a}@1]"
MIDDLE = "[{a,b}@2]"


@pytest.fixture
def f_u1(u1) -> LTree:
    return functor_f(u1, canonical_levels(u1)).tree


@pytest.fixture
def f_u2(u2) -> LTree:
    return functor_f(u2, canonical_levels(u2)).tree


def _system_of(T: LTree, labels) -> ProjectionSystem:
    family: dict[str, list[SeqOver]] = {}
    for z in labels.values():
        family.setdefault(z.base, []).append(z)
    return ProjectionSystem.build(label_N(T), family)


class TestLabeling:
    """Tests for labeling()."""

    def test_empty_chain(self, f_u1):
        """Test the labels of the four leaves of the worked ball tree."""
        result = labeling(f_u1, (), BOTTOM)
        assert len(result.labels) == 7
        assert result.enumeration == ("{a}@1", "{b}@1", "{c}@1", "{d}@1")
        assert result.labels["{a}@1"] == SeqOver(BOTTOM, (0, 0, 0))
        assert result.labels["{b}@1"] == SeqOver(BOTTOM, (1, 0, 0))
        assert result.labels["{d}@1"] == SeqOver(BOTTOM, (1, 1, 0))
        assert result.labels["{c,d}@2"] == SeqOver(MIDDLE, (1, 0))
        assert result.lambda_values["{c,d}@2"] == 1

    def test_chain_fixes_upper_coordinates(self, f_u1):
        """Test that labels below a chain extend the given sequence."""
        chain = f_u1.up_set("{c,d}@2")
        result = labeling(f_u1, chain, BOTTOM, SeqOver(MIDDLE, (1, 0)))
        assert result.labels == {
            "{c}@1": SeqOver(BOTTOM, (0, 1, 0)),
            "{d}@1": SeqOver(BOTTOM, (1, 1, 0)),
        }

    def test_unknown_class(self, f_u1):
        """Test that a name outside the condensed tree raises ClassMismatch."""
        with pytest.raises(ClassMismatch):
            labeling(f_u1, (), "[nowhere]")

    def test_chain_not_upward_closed(self, f_u1):
        """Test that a chain missing the root raises NotUpwardClosed."""
        with pytest.raises(NotUpwardClosed):
            labeling(f_u1, ("{a,b}@2",), BOTTOM, SeqOver(MIDDLE, (0, 0)))

    def test_nothing_below(self, f_u1):
        """Test that a chain through a leaf raises NotProper."""
        with pytest.raises(NotProper):
            labeling(f_u1, f_u1.up_set("{a}@1"), BOTTOM, SeqOver(BOTTOM, (0, 0, 0)))

    def test_sequence_over_wrong_class(self, f_u1):
        """Test that z̄ over another class raises ClassMismatch."""
        with pytest.raises(ClassMismatch):
            labeling(f_u1, f_u1.up_set("{c,d}@2"), BOTTOM, SeqOver(BOTTOM, (0, 1, 0)))


class TestLemmaGIso:
    """Tests for lemma_g_iso()."""

    def test_transfer(self, f_u1):
        """Test that the labeling conjugates Aut(F(U1)) onto Wr^LF, both of order 8."""
        labels = labeling(f_u1, (), BOTTOM).labels
        witness = lemma_g_iso(f_u1, labels, _system_of(f_u1, labels))
        assert witness.verified
        assert witness.target.order == 8

    def test_block_mismatch(self, f_u1):
        """Test that a node sent into another class's block raises BlockMismatch."""
        labels = dict(labeling(f_u1, (), BOTTOM).labels)
        ps = _system_of(f_u1, labels)
        labels["{a}@1"] = labels["{a,b}@2"]
        with pytest.raises(BlockMismatch):
            lemma_g_iso(f_u1, labels, ps)

    def test_order_broken(self, f_u1):
        """Test that swapping two leaf labels across parents raises NotOrderIso."""
        labels = dict(labeling(f_u1, (), BOTTOM).labels)
        ps = _system_of(f_u1, labels)
        labels["{a}@1"], labels["{c}@1"] = labels["{c}@1"], labels["{a}@1"]
        with pytest.raises(NotOrderIso):
            lemma_g_iso(f_u1, labels, ps)


class TestHomogeneous:
    """Tests for verify_homogeneous() and verify_discrete_homogeneous()."""

    def test_u1_passes(self, u1):
        """Test the full chain of isomorphisms for the worked space."""
        report = verify_homogeneous(u1)
        assert report.verdict == "PASS"
        assert report.orders["iso"] == report.orders["wreath"] == report.orders["rebuilt"] == 8
        assert report.artifacts["skeleton"]["N"] == [2, 2, 1]
        assert report.input_digest == space_digest(u1)

    def test_u2_is_diagnostic(self, u2):
        """Test that a non-homogeneous space is a diagnostic, not a failure."""
        report = verify_homogeneous(u2)
        assert report.verdict == "DIAGNOSTIC"
        assert report.witnesses == []

    def test_single_point(self, one_point):
        """Test the one-point space."""
        assert verify_homogeneous(one_point).verdict == "PASS"

    def test_discrete(self, u1):
        """Test the discrete variant records its radius."""
        report = verify_discrete_homogeneous(u1)
        assert report.verdict == "PASS"
        assert report.pipeline == "discrete"
        assert report.artifacts["discreteness_radius"] == "1"

    def test_timings(self, u1):
        """Test that stage timings are only kept on request."""
        assert verify_homogeneous(u1).timings_ms == {}
        assert "ball_tree" in verify_homogeneous(u1, include_timings=True).timings_ms


class TestGeneral:
    """Tests for verify_general() and verify_exact()."""

    def test_u2_passes(self, u2):
        """Test the non-homogeneous space against its order 2 product."""
        report = verify_general(u2)
        assert report.verdict == "PASS"
        assert report.orders["wreath"] == 2
        assert report.orders["aut"] == 2

    def test_u1_passes(self, u1):
        """Test that a homogeneous space also passes the general pipeline."""
        report = verify_general(u1)
        assert report.verdict == "PASS"
        assert report.orders["wreath"] == 8
        assert report.artifacts["twisted"] == []

    def test_tree_input(self, forked_tree):
        """Test a tree given directly."""
        report = verify_general(forked_tree)
        assert report.verdict == "PASS"
        assert report.orders["wreath"] == 2

    def test_unpruned_tree(self):
        """Test that an unpruned tree is a diagnostic."""
        T = LTree.build(
            LinearOrder.of([0, 1, 2]),
            [("r", 2, None), ("u", 1, "r"), ("v", 1, "r"), ("u0", 0, "u")],
        )
        report = verify_general(T)
        assert report.verdict == "DIAGNOSTIC"
        assert report.diagnostics == ["tree is not pruned"]

    def test_exact_tree(self, f_u2):
        """Test the cross-class labeling on the second ball tree."""
        report = verify_exact(f_u2)
        assert report.verdict == "PASS"
        assert report.orders["wreath"] == 2


class TestSkeletonSpaces:
    """Tests for space_from_skeleton() and the skeleton diagnostics."""

    def test_space_from_chain(self, chain221):
        """Test the four-point space of the (2, 2, 1) chain."""
        V = space_from_skeleton(chain221)
        assert len(V) == 4
        assert V.d((0, 0, 0), (1, 0, 0)) == Fraction(1)
        assert V.d((0, 0, 0), (0, 1, 0)) == Fraction(2)
        assert iso_group(V).order == 8

    def test_explicit_levels(self, antichain_skeleton):
        """Test that an unleveled antichain needs explicit levels."""
        with pytest.raises(MissingLevels):
            space_from_skeleton(antichain_skeleton)
        V = space_from_skeleton(antichain_skeleton, {"a1": 1, "a2": 1})
        assert len(V) == 4

    def test_non_positive_level(self, chain221):
        """Test that a zero level raises ValueError."""
        with pytest.raises(ValueError):
            space_from_skeleton(chain221, {"d1": 0, "d2": 1, "d3": 2})

    def test_quasi_maximal(self, chain221):
        """Test quasi-maximality for m = 2 and m = 3."""
        assert is_quasi_maximal(chain221, 2)
        assert not is_quasi_maximal(chain221, 3)
        with pytest.raises(ValueError):
            is_quasi_maximal(chain221, 0)

    def test_simplify(self, chain221):
        """Test that the N = 1 top is dropped and the product is unchanged."""
        reduced, witness = simplify_skeleton(chain221)
        assert reduced.elements == ("d1", "d2")
        assert witness.verified
        assert witness.source.order == 8

    def test_simplify_keeps_bottom(self):
        """Test that an N = 1 bottom survives simplification."""
        reduced, witness = simplify_skeleton(Skeleton.chain([1, 1, 1]))
        assert reduced.elements == ("d1",)
        assert witness.verified

    def test_simplify_needs_chain(self, antichain_skeleton):
        """Test that a non-linear skeleton raises NotLinear."""
        with pytest.raises(NotLinear):
            simplify_skeleton(antichain_skeleton)

    def test_urysohn_u1(self, u1):
        """Test wideness and quasi-maximality of the worked space."""
        report = urysohn_diagnostics(u1, 2)
        assert report.skeleton_N == [2, 2, 1]
        assert report.simplified_N == [2, 2]
        assert report.quasi_maximal
        assert report.wide == {"1": True, "2": True}
        assert report.simplify_witness.verified

    def test_urysohn_non_linear(self, u2):
        """Test that a branching condensed skeleton raises NotLinear."""
        with pytest.raises(NotLinear):
            urysohn_diagnostics(u2, 2)


class TestRoundtrip:
    """Tests for roundtrip_wreath()."""

    def test_w3(self, w3):
        """Test the twisted system through its truncated tree."""
        report = roundtrip_wreath(w3)
        assert report.verdict == "PASS"
        assert report.orders == {"wreath": 2, "aut": 2}
        assert report.artifacts["depth"] == 4

    def test_chain(self, chain_bundle):
        """Test the usual wreath product of order 8."""
        report = roundtrip_wreath(chain_bundle, depth=3)
        assert report.verdict == "PASS"
        assert report.orders["aut"] == 8

    def test_trivial(self, trivial_bundle):
        """Test the one-point skeleton."""
        assert roundtrip_wreath(trivial_bundle).orders["wreath"] == 1

    def test_missing_levels(self, antichain_skeleton):
        """Test that a skeleton without levels raises MissingLevels."""
        with pytest.raises(MissingLevels):
            roundtrip_wreath(SkeletonBundle(antichain_skeleton))

    def test_condensed_reused(self, f_u1):
        """Test that passing a condensation gives the same labels."""
        cond = condense(f_u1)
        assert labeling(f_u1, (), BOTTOM, None, cond).labels == labeling(f_u1, (), BOTTOM).labels


def test_space_digest_is_stable(u1):
    """Test that equal spaces share a digest."""
    again = UltraSpace.from_pairs("abcd", {("a", "b"): 1, ("c", "d"): 1}, default=2)
    assert space_digest(again) == space_digest(u1)
