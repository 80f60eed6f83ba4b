"""The ball-tree, tree-metric and point-replacement constructions.

``functor_f`` turns a space into the tree of its open balls, ``functor_g``
turns a pruned tree into a uniformly discrete space on its nodes, and
``functor_u`` replaces every point by a copy of a finite binary comb. Each
comes with the group checks that tie its automorphisms to the input's.
"""

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Hashable, Mapping, Optional, Sequence

from .errors import (
    ConditionTwoViolated,
    InvariantViolation,
    NotIsometric,
    NotPruned,
    RadiiTooLarge,
)
from .ltree import LinearOrder, LTree, aut_group, is_pruned, spl, validate_ltree
from .models import CombContractReport, FullnessReport
from .permgroup import (
    DEFAULT_MAX_ORDER,
    IsoWitness,
    Permutation,
    PermGroup,
    small_generating_set,
    verify_induced_conjugation,
)
from .ultrametric import UltraSpace, ball, iso_group, validate_space

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BallTree:
    """Output of the ball-tree construction.

    Attributes:
        tree (LTree): Nodes are pairs (ball, level) named like ``{a,b}@2``.
        node_map (Mapping[tuple[Hashable, int], str]): (point, level index) to the node of its ball.
        balls (Mapping[str, tuple[Hashable, ...]]): Node to the points of its ball.
    """

    tree: LTree
    node_map: Mapping[tuple[Hashable, int], str]
    balls: Mapping[str, tuple[Hashable, ...]]

    def singleton_node(self, x: Hashable) -> str:
        """Node of {x} at the bottom level."""
        return self.node_map[(x, 0)]


def _ball_id(points: Sequence[Hashable], label: Fraction) -> str:
    return "{" + ",".join(str(p) for p in points) + "}@" + str(label)


def check_condition_two(U: UltraSpace, L: LinearOrder) -> None:
    """Raise unless L contains D and brackets it from below and strictly above.

    Raises:
        ConditionTwoViolated: Naming the missing bound.
    """
    D = U.distance_set
    missing = [r for r in D if r not in L.labels]
    if missing:
        raise ConditionTwoViolated(
            "level order does not contain the distance set",
            {"missing": [str(r) for r in missing]},
        )
    if D and not any(label <= D[0] for label in L.labels):
        raise ConditionTwoViolated("no level at or below min D", {"min_D": str(D[0])})
    top = D[-1] if D else Fraction(0)
    if not any(label > top for label in L.labels):
        raise ConditionTwoViolated("no level above max D", {"max_D": str(top)})


def functor_f(U: UltraSpace, L: LinearOrder) -> BallTree:
    """Tree of open balls: nodes (B(x, ℓ), ℓ) ordered by inclusion and level.

    Raises:
        ConditionTwoViolated: If L does not satisfy the bracketing condition.
    """
    check_condition_two(U, L)
    entries_by_level: list[list[tuple[tuple[Hashable, ...], str]]] = []
    node_map: dict[tuple[Hashable, int], str] = {}
    balls: dict[str, tuple[Hashable, ...]] = {}
    for lv, label in enumerate(L.labels):
        seen: dict[tuple[Hashable, ...], str] = {}
        for x in U.points:
            B = ball(U, x, label)
            if B not in seen:
                seen[B] = _ball_id(B, label)
                balls[seen[B]] = B
            node_map[(x, lv)] = seen[B]
        entries_by_level.append(list(seen.items()))

    entries = []
    top = len(L) - 1
    for lv, level_balls in enumerate(entries_by_level):
        for B, node in level_balls:
            parent = node_map[(B[0], lv + 1)] if lv < top else None
            entries.append((node, lv, parent))
    tree = LTree.build(L, entries)
    report = validate_ltree(tree)
    if not report.ok or not is_pruned(tree):
        raise InvariantViolation(
            "ball tree is not a pruned L-tree", {"report": report.model_dump()}
        )
    return BallTree(tree, node_map, balls)


def _check_isometric(U: UltraSpace, V: UltraSpace, psi: Mapping[Hashable, Hashable]) -> None:
    for x in U.points:
        if x not in psi or psi[x] not in V.points:
            raise NotIsometric(f"map is not defined on {x!r}", {"point": repr(x)})
        for y in U.points:
            if U.d(x, y) != V.d(psi[x], psi[y]):
                raise NotIsometric(
                    f"d({x},{y}) is not preserved", {"pair": [str(x), str(y)]}
                )


def functor_f_mor(
    U: UltraSpace,
    V: UltraSpace,
    psi: Mapping[Hashable, Hashable],
    L: LinearOrder,
    source: Optional[BallTree] = None,
    target: Optional[BallTree] = None,
) -> dict[str, str]:
    """Tree embedding f(B(x, ℓ), ℓ) = (B(ψ(x), ℓ), ℓ) induced by an isometric embedding.

    Raises:
        NotIsometric: If ψ does not preserve distances.
    """
    _check_isometric(U, V, psi)
    src = source if source is not None else functor_f(U, L)
    dst = target if target is not None else functor_f(V, L)
    mapping: dict[str, str] = {}
    for (x, lv), node in src.node_map.items():
        mapping[node] = dst.node_map[(psi[x], lv)]
    return mapping


def verify_f_iso(
    U: UltraSpace, L: LinearOrder, max_order: int = DEFAULT_MAX_ORDER
) -> IsoWitness:
    """Check that ψ ↦ F(ψ) is a bijective homomorphism Iso(U) → Aut(F(U)).

    The returned witness conjugates Iso(U) onto Aut(F(U)) through the
    bottom-level singleton nodes, which form an invariant faithful block.
    """
    G = iso_group(U, max_order)
    ft = functor_f(U, L)
    A = aut_group(ft.tree, max_order)

    images: dict[Permutation, Permutation] = {}
    for psi in G.elements:
        node_perm = functor_f_mor(U, U, psi.as_mapping(), L, ft, ft)
        images[psi] = Permutation.from_mapping(ft.tree.nodes, node_perm)

    beta = {x: ft.singleton_node(x) for x in U.points}
    witness = verify_induced_conjugation(G, A, beta)

    gens = small_generating_set(G, max_order)
    if len(set(images.values())) != len(images):
        return replace(witness, verified=False, reason="psi -> F(psi) is not injective")
    for g in G.elements:
        for h in gens:
            if images[g.compose(h)] != images[g].compose(images[h]):
                return replace(
                    witness, verified=False, failure=g, reason="psi -> F(psi) is not a homomorphism"
                )
    if set(images.values()) != A.element_set:
        return replace(witness, verified=False, reason="image of F is not Aut(F(U))")
    return witness


def canonical_levels(U: UltraSpace, G: Optional[PermGroup] = None) -> LinearOrder:
    """Finite level set L' = D ∪ {min D} ∪ {2·max D}, closed under the pair suprema.

    For every pair (x, x') the set of ℓ ∈ L' not exceeding
    min_ψ d(ψ(x), x') is adjoined through its maximum; finite suprema are
    maxima, so the result equals L'.
    """
    D = U.distance_set
    if not D:
        return LinearOrder((Fraction(1), Fraction(2)))
    base = set(D) | {D[0], 2 * D[-1]}
    group = G if G is not None else iso_group(U)
    adjoined = set(base)
    for x in U.points:
        for y in U.points:
            closest = min(U.d(psi(x), y) for psi in group.elements)
            below = [label for label in base if label <= closest]
            if below:
                adjoined.add(max(below))
    if adjoined != base:
        raise InvariantViolation("finite suprema left the base level set")
    return LinearOrder(tuple(sorted(adjoined)))


@dataclass(frozen=True)
class LevelEmbedding:
    """Interleaved images ℓ⁻ < ℓ⁺ < ℓ'⁻ realizing 2·L inside the positive rationals."""

    order: LinearOrder
    minus: tuple[Fraction, ...]
    plus: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.minus) != len(self.order) or len(self.plus) != len(self.order):
            raise ValueError("embedding must give a pair for every level")
        flat = [v for pair in zip(self.minus, self.plus) for v in pair]
        if flat[0] <= 0 or any(a >= b for a, b in zip(flat, flat[1:])):
            raise ValueError("embedding values must be positive, increasing and interleaved")

    @classmethod
    def standard(cls, order: LinearOrder) -> "LevelEmbedding":
        """ℓ_i ↦ (2i+1, 2i+2)."""
        n = len(order)
        return cls(
            order,
            tuple(Fraction(2 * i + 1) for i in range(n)),
            tuple(Fraction(2 * i + 2) for i in range(n)),
        )

    @classmethod
    def from_pairs(
        cls, order: LinearOrder, pairs: Mapping[Fraction, tuple[Fraction, Fraction]]
    ) -> "LevelEmbedding":
        missing = [label for label in order.labels if label not in pairs]
        if missing:
            raise ValueError(f"embedding has no pair for levels {[str(m) for m in missing]}")
        return cls(
            order,
            tuple(Fraction(pairs[label][0]) for label in order.labels),
            tuple(Fraction(pairs[label][1]) for label in order.labels),
        )


def functor_g(T: LTree, emb: LevelEmbedding) -> UltraSpace:
    """Space on the nodes: λ(max)⁻ on comparable pairs, spl⁺ on incomparable ones.

    Raises:
        NotPruned: If T is not pruned.
    """
    if not is_pruned(T):
        raise NotPruned("tree metric needs a pruned tree")
    if emb.order != T.order:
        raise ValueError("embedding is over a different level order")
    n = len(T.nodes)
    ids = T.ids
    matrix = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if T.leq_pos(i, j) or T.leq_pos(j, i):
                value = emb.minus[max(T.level[i], T.level[j])]
            else:
                value = emb.plus[T.order.index_of(spl(T, ids[i], ids[j]))]
            matrix[i][j] = matrix[j][i] = value
    space = UltraSpace.from_matrix(ids, matrix)
    report = validate_space(space)
    if not report.ok:
        raise InvariantViolation(
            "tree metric is not an ultrametric", {"report": report.model_dump()}
        )
    return space


def g_fullness_diagnostic(
    T: LTree, emb: LevelEmbedding, max_order: int = DEFAULT_MAX_ORDER
) -> FullnessReport:
    """Compare Aut(T) with Iso(G(T)); Aut ⊆ Iso always holds, equality may not.

    Raises:
        InvariantViolation: If some automorphism is not an isometry.
    """
    space = functor_g(T, emb)
    A = aut_group(T, max_order)
    I = iso_group(space, max_order, cross_check=False)  # noqa: E741
    forward = all(g in I for g in A.elements)
    if not forward:
        raise InvariantViolation("a tree automorphism is not an isometry of the tree metric")
    equal = A.order == I.order
    if not equal:
        logger.warning(f"Aut order {A.order} differs from Iso order {I.order} of the tree metric")
    return FullnessReport(aut_order=A.order, iso_order=I.order, forward_inclusion=True, equal=equal)


def pad_chain(T: LTree, k: int) -> LTree:
    """Append a descending chain of k fresh levels below every bottom node."""
    if k < 0:
        raise ValueError("k cannot be negative")
    if k == 0:
        return T
    low = T.order.labels[0]
    order = LinearOrder(tuple(low - (k - i) for i in range(k)) + T.order.labels)
    entries = []
    for i, t in enumerate(T.ids):
        p = T.parent[i]
        entries.append((t, T.level[i] + k, T.ids[p] if p is not None else None))
    for t in T.level_nodes(0):
        for j in range(1, k + 1):
            entries.append((f"{t}~{j}", k - j, t if j == 1 else f"{t}~{j - 1}"))
    return LTree.build(order, entries)


def verify_pad_chain(T: LTree, k: int, max_order: int = DEFAULT_MAX_ORDER) -> IsoWitness:
    """Witness that Aut(pad_chain(T, k)) ≅ Aut(T) through the original nodes."""
    padded = pad_chain(T, k)
    return verify_induced_conjugation(
        aut_group(T, max_order), aut_group(padded, max_order), {t: t for t in T.ids}
    )


def binary_prefixes(k: int) -> tuple[str, ...]:
    """Binary strings shorter than k, length first then lexicographic."""
    out = [""]
    for length in range(1, k):
        out.extend(format(v, f"0{length}b") for v in range(2**length))
    return tuple(out)


@dataclass(frozen=True)
class RigidComb:
    """Depth-k binary comb: d(y, y') = r_n for n the index of their longest common prefix."""

    depth: int
    radii: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("comb depth must be at least 1")
        if len(self.radii) != 2**self.depth - 1:
            raise ValueError(f"depth {self.depth} needs {2**self.depth - 1} radii")
        if self.radii[-1] <= 0 or any(a <= b for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("radii must be positive and strictly decreasing")

    @property
    def points(self) -> tuple[str, ...]:
        return tuple(format(v, f"0{self.depth}b") for v in range(2**self.depth))

    @property
    def enumeration(self) -> tuple[str, ...]:
        return binary_prefixes(self.depth)

    def distance(self, y: str, z: str) -> Fraction:
        if y == z:
            return Fraction(0)
        common = 0
        while y[common] == z[common]:
            common += 1
        return self.radii[self.enumeration.index(y[:common])]

    def space(self) -> UltraSpace:
        pts = self.points
        return UltraSpace.from_matrix(pts, [[self.distance(y, z) for z in pts] for y in pts])

    def expected_iso_order(self) -> int:
        """Deepest-level sibling swaps: 2^(2^(k-1))."""
        return 2 ** (2 ** (self.depth - 1))


def rigid_comb(k: int, radii: Optional[Sequence] = None) -> RigidComb:
    """Build a depth-k comb; default radii are 1/2, 1/3, ..."""
    if radii is None:
        radii = [Fraction(1, n + 2) for n in range(2**k - 1)]
    return RigidComb(k, tuple(Fraction(r) for r in radii))


def functor_u(U: UltraSpace, comb: RigidComb) -> UltraSpace:
    """U × comb with d̂ = d(x, x') across copies and the comb metric inside one.

    Raises:
        RadiiTooLarge: If the comb radii are not all below min D.
    """
    D = U.distance_set
    if D and comb.radii[0] >= D[0]:
        raise RadiiTooLarge(
            "comb radii must lie below min D", {"min_D": str(D[0]), "largest": str(comb.radii[0])}
        )
    pts = [(x, y) for x in U.points for y in comb.points]
    ids = [f"{x}:{y}" for x, y in pts]
    matrix = [
        [U.d(x, x2) if x != x2 else comb.distance(y, y2) for (x2, y2) in pts] for (x, y) in pts
    ]
    return UltraSpace.from_matrix(ids, matrix)


def verify_comb_contract(
    U: UltraSpace, comb: RigidComb, max_order: int = DEFAULT_MAX_ORDER
) -> CombContractReport:
    """Check |Iso(U × comb)| = |Iso(U)| · |Iso(comb)|^|U| and that copies map onto copies."""
    base = iso_group(U, max_order)
    comb_group = iso_group(comb.space(), max_order)
    product = functor_u(U, comb)
    full = iso_group(product, max_order, cross_check=False)
    copy_of = {f"{x}:{y}": x for x in U.points for y in comb.points}
    copies_preserved = True
    for g in full.elements:
        for x in U.points:
            targets = {copy_of[g(f"{x}:{y}")] for y in comb.points}
            if len(targets) != 1:
                copies_preserved = False
    return CombContractReport(
        base_order=base.order,
        comb_order=comb_group.order,
        points=len(U.points),
        expected_order=base.order * comb_group.order ** len(U.points),
        actual_order=full.order,
        copies_preserved=copies_preserved,
    )
