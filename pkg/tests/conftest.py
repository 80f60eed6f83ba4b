"""Shared fixtures: the small worked spaces and bundles used across test modules."""

import json
from fractions import Fraction

import pytest

from ultrametric_wreath.ltree import LinearOrder, LTree, chain_tree
from ultrametric_wreath.skeleton import SeqOver, Skeleton
from ultrametric_wreath.ultrametric import UltraSpace
from ultrametric_wreath.wreath import LocalFamily, ProjectionSystem, SkeletonBundle


@pytest.fixture
def u1() -> UltraSpace:
    """{a,b,c,d} with d(a,b) = d(c,d) = 1 and every cross distance 2."""
    return UltraSpace.from_pairs("abcd", {("a", "b"): 1, ("c", "d"): 1}, default=2)


@pytest.fixture
def u2() -> UltraSpace:
    """{a,b,c} with d(a,b) = 1 and c at distance 2 from both."""
    return UltraSpace.from_pairs("abc", {("a", "b"): 1}, default=2)


@pytest.fixture
def two_points() -> UltraSpace:
    return UltraSpace.from_pairs("xy", {("x", "y"): 1})


@pytest.fixture
def one_point() -> UltraSpace:
    return UltraSpace.from_matrix(["p"], [[0]])


@pytest.fixture
def chain2() -> LTree:
    """Two nodes, one above the other, at levels 0 < 1."""
    return chain_tree([0, 1])


@pytest.fixture
def forked_tree() -> LTree:
    """A root at level 2 with two children, the first of which has two leaves."""
    order = LinearOrder.of([1, 2, 3])
    return LTree.build(
        order,
        [("r", 2, None), ("u", 1, "r"), ("v", 1, "r"), ("u0", 0, "u"), ("u1", 0, "u"),
         ("v0", 0, "v")],
    )


@pytest.fixture
def chain_skeleton() -> Skeleton:
    """δ1 < δ2 with N = (2, 2) and levels 1, 2."""
    return Skeleton.build(
        ["d1", "d2"], [("d1", "d2")], {"d1": 2, "d2": 2}, {"d1": Fraction(1), "d2": Fraction(2)}
    )


@pytest.fixture
def antichain_skeleton() -> Skeleton:
    return Skeleton.build(["a1", "a2"], [], {"a1": 2, "a2": 2})


@pytest.fixture
def chain221() -> Skeleton:
    """The skeleton of the ball tree of u1: δ1 < δ2 < δ3, N = (2, 2, 1)."""
    return Skeleton.build(
        ["d1", "d2", "d3"],
        [("d1", "d2"), ("d2", "d3")],
        {"d1": 2, "d2": 2, "d3": 1},
        {"d1": Fraction(1), "d2": Fraction(2), "d3": Fraction(4)},
    )


@pytest.fixture
def trivial_skeleton() -> Skeleton:
    return Skeleton.build(["t"], [], {"t": 1}, {"t": Fraction(1)})


@pytest.fixture
def w3() -> ProjectionSystem:
    """δ1 < δ2, N = (1, 2), with π_{δ1δ2}(0, j) = (1 - j)."""
    sk = Skeleton.build(
        ["d1", "d2"], [("d1", "d2")], {"d1": 1, "d2": 2}, {"d1": Fraction(1), "d2": Fraction(2)}
    )
    family = {
        "d2": [SeqOver("d2", (0,)), SeqOver("d2", (1,))],
        "d1": [SeqOver("d1", (0, 0)), SeqOver("d1", (0, 1))],
    }
    twist = {
        ("d1", "d2"): {
            SeqOver("d1", (0, 0)): SeqOver("d2", (1,)),
            SeqOver("d1", (0, 1)): SeqOver("d2", (0,)),
        }
    }
    return ProjectionSystem.build(sk, family, twist)


@pytest.fixture
def chain_bundle(chain_skeleton) -> SkeletonBundle:
    return SkeletonBundle(chain_skeleton)


@pytest.fixture
def trivial_bundle(trivial_skeleton) -> SkeletonBundle:
    return SkeletonBundle(trivial_skeleton)


@pytest.fixture
def chain_family(chain_skeleton) -> LocalFamily:
    """Every sequence over the 2-chain: 4 at δ1, 2 at δ2."""
    return LocalFamily.of(
        chain_skeleton,
        {
            "d1": [SeqOver("d1", (i, j)) for i in range(2) for j in range(2)],
            "d2": [SeqOver("d2", (j,)) for j in range(2)],
        },
    )


@pytest.fixture
def write_json(tmp_path):
    """Write a JSON document into the test's temporary directory and return its path."""

    def write(name: str, data) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write
