"""Seeded property suites over randomly generated trees and projection systems.

Each suite checks one structural claim on many small random inputs against
the exhaustive oracles kept in the package.
"""

import itertools
import random

import pytest

from ultrametric_wreath.corpus import random_projection_system, random_pruned_tree
from ultrametric_wreath.functors import LevelEmbedding, g_fullness_diagnostic
from ultrametric_wreath.ltree import condense, is_special, property_star
from ultrametric_wreath.pipelines import labeling, roundtrip_wreath
from ultrametric_wreath.skeleton import SeqOver, Skeleton
from ultrametric_wreath.wreath import (
    SUPPORT_TAGS,
    ProjectionSystem,
    SkeletonBundle,
    as_system,
    brute_wreath_oracle,
    domain_from_supports,
    verify_rho,
    wreath_group,
)

TREE_SEEDS = range(50)
SYSTEM_SEEDS = range(20)


class TestRandomSystems:
    """Projection systems with twisted projections."""

    @pytest.mark.parametrize("seed", SYSTEM_SEEDS)
    def test_rho_equivalence(self, seed):
        """Test that ρ conjugates the twisted product onto the plain one."""
        ps = random_projection_system(random.Random(seed))
        witness = verify_rho(ps)
        assert witness.verified
        assert witness.source.order == witness.target.order

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        """Test the fibre search against filtering every permutation of the ground."""
        ps = random_projection_system(random.Random(seed))
        assert wreath_group(ps).same_elements(brute_wreath_oracle(ps))

    @pytest.mark.parametrize("seed", range(8))
    def test_supports_collapse(self, seed):
        """Test that the four support families give one domain on a finite skeleton."""
        sk = random_projection_system(random.Random(seed)).skeleton
        domains = {domain_from_supports(sk, tag) for tag in SUPPORT_TAGS}
        assert len(domains) == 1

    @pytest.mark.parametrize("seed", range(6))
    def test_roundtrip_never_silent(self, seed):
        """Test that a round trip either passes or says what broke."""
        ps = random_projection_system(random.Random(seed))
        if len(ps.skeleton) > 3:
            pytest.skip("depth above 4 needed")
        report = roundtrip_wreath(ps, depth=len(ps.skeleton) + 1)
        assert report.verdict == "PASS" or report.diagnostics


def _skeleton(order: str, N: tuple[int, ...]) -> Skeleton:
    """Small named shapes: a point, chains, antichains, V (one below two) and Λ (two below one)."""
    names = [f"d{i + 1}" for i in range(len(N))]
    if order == "chain":
        pairs = list(zip(names, names[1:]))
    elif order == "antichain":
        pairs = []
    elif order == "V":
        pairs = [(names[0], names[1]), (names[0], names[2])]
    else:
        pairs = [(names[0], names[2]), (names[1], names[2])]
    return Skeleton.build(names, pairs, dict(zip(names, N)))


def _flip_own(sk: Skeleton, w: SeqOver, g: str) -> SeqOver:
    values = list(w.values)
    pos = sk.position(g, g)
    values[pos] = sk.n(g) - 1 - values[pos]
    return SeqOver(g, tuple(values))


def _twisted(sk: Skeleton) -> ProjectionSystem:
    """Every sequence, with each proper projection reversing the target's own coordinate."""
    family = {
        d: [
            SeqOver(d, values)
            for values in itertools.product(*(range(sk.n(g)) for g in sk.up_set(d)))
        ]
        for d in sk.elements
    }
    overrides = {
        (d, g): {z: _flip_own(sk, sk.restrict(z, g), g) for z in family[d]}
        for d in sk.elements
        for g in sk.up_set(d)
        if g != d
    }
    return ProjectionSystem.build(sk, family, overrides)


ORACLE_SHAPES = {
    "point-1": ("chain", (1,), False),
    "point-2": ("chain", (2,), False),
    "point-3": ("chain", (3,), False),
    "chain-1-2": ("chain", (1, 2), False),
    "chain-2-1": ("chain", (2, 1), False),
    "chain-2-2": ("chain", (2, 2), False),
    "chain-1-1-2": ("chain", (1, 1, 2), False),
    "chain-2-1-2": ("chain", (2, 1, 2), False),
    "chain-2-2-1": ("chain", (2, 2, 1), False),
    "antichain-2-2": ("antichain", (2, 2), False),
    "antichain-2-1-2": ("antichain", (2, 1, 2), False),
    "v-1-2-2": ("V", (1, 2, 2), False),
    "lambda-2-2-1": ("Λ", (2, 2, 1), False),
    "lambda-1-1-2": ("Λ", (1, 1, 2), False),
    "twisted-chain-1-2": ("chain", (1, 2), True),
    "twisted-chain-2-2": ("chain", (2, 2), True),
    "twisted-chain-2-1-2": ("chain", (2, 1, 2), True),
    "twisted-v-1-2-2": ("V", (1, 2, 2), True),
    "twisted-lambda-1-1-2": ("Λ", (1, 1, 2), True),
}


class TestOracleShapes:
    """The fibre search against the brute filter on small hand-picked skeletons."""

    @pytest.mark.parametrize("name", sorted(ORACLE_SHAPES))
    def test_matches_brute_force(self, name):
        """Test that both enumerations give the same set of permutations."""
        order, N, twisted = ORACLE_SHAPES[name]
        sk = _skeleton(order, N)
        bundle = _twisted(sk) if twisted else SkeletonBundle(sk)
        assert len(as_system(bundle).ground) <= 8
        if twisted:
            assert not bundle.is_trivial()
        assert wreath_group(bundle).same_elements(brute_wreath_oracle(bundle))


class TestRandomTrees:
    """Pruned trees with at most eight nodes."""

    @pytest.mark.parametrize("seed", TREE_SEEDS)
    def test_g_forward_inclusion(self, seed):
        """Test that every automorphism is an isometry of the tree metric."""
        T = random_pruned_tree(random.Random(seed))
        report = g_fullness_diagnostic(T, LevelEmbedding.standard(T.order))
        assert report.forward_inclusion
        assert report.aut_order <= report.iso_order

    @pytest.mark.parametrize("seed", TREE_SEEDS)
    def test_labeling_every_bottom_class(self, seed):
        """Test that the labeling from each bottom class passes its own checks."""
        T = random_pruned_tree(random.Random(seed))
        cond = condense(T)
        for bottom in cond.tree.level_nodes(0):
            result = labeling(T, (), bottom, None, cond)
            assert len(set(result.labels.values())) == len(result.labels)

    @pytest.mark.parametrize("seed", TREE_SEEDS)
    def test_finite_trees_are_special(self, seed):
        """Test that (★) and specialness hold on finite trees."""
        T = random_pruned_tree(random.Random(seed))
        assert is_special(T)
        assert property_star(T).holds
