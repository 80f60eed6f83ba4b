"""Finite L-trees.

A tree is stored through its parent map: every node below the top level has
exactly one parent at the next level index. The level-ℓ ancestor ``t|_ℓ``
(``up``) is derived from it, and ``≤_T`` from ``up``.

Automorphisms are enumerated from canonical subtree forms: two children can
be exchanged only when their subtrees have the same form, so the search never
visits a non-automorphism.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Mapping, Optional, Sequence

from .errors import (
    Comparable,
    InvariantViolation,
    MissingLevels,
    NotInClass,
    NotTreeable,
    OrderGuardExceeded,
)
from .models import ValidationReport, Violation
from .permgroup import (
    DEFAULT_MAX_ORDER,
    GroundSet,
    Permutation,
    PermGroup,
    group_from_elements,
    orbits,
)
from .skeleton import Skeleton

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearOrder:
    """Strictly ascending finite list of rational level labels."""

    labels: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("linear order cannot be empty")
        if any(a >= b for a, b in zip(self.labels, self.labels[1:])):
            raise ValueError("level labels must be strictly increasing")

    @classmethod
    def of(cls, labels: Sequence) -> "LinearOrder":
        return cls(tuple(Fraction(str(x)) if isinstance(x, str) else Fraction(x) for x in labels))

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: Fraction) -> int:
        try:
            return self.labels.index(label)
        except ValueError as e:
            raise ValueError(f"{label} is not a level of this order") from e


@dataclass(frozen=True)
class LTree:
    """A finite tree fibred over a linear order.

    Attributes:
        order (LinearOrder): The levels L.
        nodes (GroundSet): Node identifiers in canonical order.
        level (tuple[int, ...]): Level index of each node.
        parent (tuple[Optional[int], ...]): Position of the parent (next level index), None at top.
    """

    order: LinearOrder
    nodes: GroundSet
    level: tuple[int, ...]
    parent: tuple[Optional[int], ...]

    @classmethod
    def build(
        cls,
        order: LinearOrder,
        entries: Sequence[tuple[str, int, Optional[str]]],
    ) -> "LTree":
        """Build from ``(id, level index, parent id)`` triples.

        Raises:
            ValueError: If a parent id is unknown.
        """
        ground = GroundSet(tuple(e[0] for e in entries))
        parents = []
        for node, _, parent in entries:
            if parent is None:
                parents.append(None)
            elif parent not in ground:
                raise ValueError(f"node {node} has unknown parent {parent}")
            else:
                parents.append(ground.index[parent])
        return cls(order, ground, tuple(e[1] for e in entries), tuple(parents))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def ids(self) -> tuple[str, ...]:
        return self.nodes.elements

    def pos(self, t: str) -> int:
        return self.nodes.position(t)

    def lam(self, t: str) -> Fraction:
        return self.order.labels[self.level[self.pos(t)]]

    @cached_property
    def _ancestors(self) -> tuple[tuple[int, ...], ...]:
        chains = []
        for i in range(len(self.nodes)):
            chain = [i]
            while self.parent[chain[-1]] is not None:
                chain.append(self.parent[chain[-1]])
            chains.append(tuple(chain))
        return tuple(chains)

    def up_pos(self, i: int, lvl: int) -> int:
        offset = lvl - self.level[i]
        if offset < 0:
            raise ValueError("up requires a level at or above the node's own")
        return self._ancestors[i][offset]

    def up(self, t: str, lvl: int) -> str:
        """t|_ℓ for a level index ``lvl`` ≥ λ(t)."""
        return self.ids[self.up_pos(self.pos(t), lvl)]

    def leq_pos(self, i: int, j: int) -> bool:
        return self.level[i] <= self.level[j] and self.up_pos(i, self.level[j]) == j

    def leq(self, t: str, s: str) -> bool:
        return self.leq_pos(self.pos(t), self.pos(s))

    def comparable(self, t: str, s: str) -> bool:
        return self.leq(t, s) or self.leq(s, t)

    @cached_property
    def _children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.nodes]
        for i, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(i)
        return tuple(tuple(k) for k in kids)

    def children(self, t: str) -> tuple[str, ...]:
        return tuple(self.ids[c] for c in self._children[self.pos(t)])

    def level_nodes(self, lvl: int) -> tuple[str, ...]:
        return tuple(t for t, lv in zip(self.ids, self.level) if lv == lvl)

    @property
    def top(self) -> str:
        tops = [t for t, p in zip(self.ids, self.parent) if p is None]
        if len(tops) != 1:
            raise ValueError("tree does not have a single top node")
        return tops[0]

    def up_set(self, t: str) -> tuple[str, ...]:
        """The upward closed chain {t|_ℓ : ℓ ≥ λ(t)}, bottom first."""
        return tuple(self.ids[i] for i in self._ancestors[self.pos(t)])

    def descendants(self, t: str) -> tuple[str, ...]:
        i = self.pos(t)
        return tuple(self.ids[j] for j in range(len(self.nodes)) if self.leq_pos(j, i))


def chain_tree(levels: Sequence, prefix: str = "n") -> LTree:
    """A single chain with one node per level."""
    order = LinearOrder.of(levels)
    n = len(order)
    entries = [(f"{prefix}{i}", i, f"{prefix}{i + 1}" if i + 1 < n else None) for i in range(n)]
    return LTree.build(order, entries)


def validate_ltree(T: LTree) -> ValidationReport:
    """Check the L-tree axioms exhaustively, naming offending nodes."""
    ids = [str(t) for t in T.ids]
    top = len(T.order) - 1
    violations: list[Violation] = []
    for i, (lv, p) in enumerate(zip(T.level, T.parent)):
        if not 0 <= lv <= top:
            violations.append(
                Violation(
                    axiom="level-range", where=[ids[i]], message=f"level index {lv} out of range"
                )
            )
            continue
        if p is None and lv != top:
            violations.append(
                Violation(
                    axiom="missing-ancestor",
                    where=[ids[i]],
                    message=f"node {ids[i]} below the top level has no parent",
                )
            )
        if p is not None and lv == top:
            violations.append(
                Violation(axiom="top-parent", where=[ids[i]], message="top-level node has a parent")
            )
        if p is not None and T.level[p] != lv + 1:
            violations.append(
                Violation(
                    axiom="level-gap",
                    where=[ids[i], ids[p]],
                    message=f"parent {ids[p]} is not exactly one level above {ids[i]}",
                )
            )
    present = set(T.level)
    for lv in range(len(T.order)):
        if lv not in present:
            violations.append(
                Violation(
                    axiom="surjective",
                    where=[str(T.order.labels[lv])],
                    message=f"no node at level {T.order.labels[lv]}",
                )
            )
    tops = [ids[i] for i, lv in enumerate(T.level) if lv == top]
    if len(tops) > 1:
        violations.append(
            Violation(
                axiom="common-upper-bound",
                where=tops,
                message="distinct top-level nodes have no common upper bound",
            )
        )
    if violations:
        return ValidationReport.from_violations("tree", violations)

    # Structure is sound; check coherence and splitting literally.
    n = len(T.nodes)
    for i in range(n):
        for lv in range(T.level[i], len(T.order)):
            a = T.up_pos(i, lv)
            if T.level[a] != lv:
                violations.append(
                    Violation(axiom="coherence", where=[ids[i]], message=f"up at {lv} is off-level")
                )
            for lv2 in range(lv, len(T.order)):
                if T.up_pos(a, lv2) != T.up_pos(i, lv2):
                    violations.append(
                        Violation(
                            axiom="coherence",
                            where=[ids[i], str(lv), str(lv2)],
                            message="up(up(t, l), l') differs from up(t, l')",
                        )
                    )
    for i in range(n):
        for j in range(i + 1, n):
            if T.leq_pos(i, j) or T.leq_pos(j, i):
                continue
            if _spl_index(T, i, j) is None:
                violations.append(
                    Violation(
                        axiom="splitting", where=[ids[i], ids[j]], message="no splitting level"
                    )
                )
    return ValidationReport.from_violations("tree", violations)


def _spl_index(T: LTree, i: int, j: int) -> Optional[int]:
    start = max(T.level[i], T.level[j])
    found = None
    for lv in range(start, len(T.order)):
        if T.up_pos(i, lv) != T.up_pos(j, lv):
            found = lv
    return found


def spl(T: LTree, t: str, s: str) -> Fraction:
    """Splitting level: the largest ℓ at which t|_ℓ and s|_ℓ differ.

    Raises:
        Comparable: If t and s are comparable.
    """
    if T.comparable(t, s):
        raise Comparable(f"{t} and {s} are comparable", {"nodes": [t, s]})
    idx = _spl_index(T, T.pos(t), T.pos(s))
    if idx is None:
        raise InvariantViolation("incomparable nodes without a splitting level")
    return T.order.labels[idx]


def branches(T: LTree) -> list[tuple[str, ...]]:
    """All branches, bottom level first, one per min-level node."""
    return [T.up_set(t) for t in T.level_nodes(0)]


def is_pruned(T: LTree) -> bool:
    covered = {t for b in branches(T) for t in b}
    return len(covered) == len(T.nodes)


def restrict(T: LTree, label: Fraction) -> LTree:
    """T|_ℓ: the nodes at levels ≥ ℓ over the order [ℓ, +∞)."""
    cut = T.order.index_of(Fraction(label))
    order = LinearOrder(T.order.labels[cut:])
    entries = []
    for i, t in enumerate(T.ids):
        if T.level[i] >= cut:
            p = T.parent[i]
            entries.append((t, T.level[i] - cut, T.ids[p] if p is not None else None))
    return LTree.build(order, entries)


def _canonical_forms(T: LTree) -> tuple[int, ...]:
    """Integer code per node; equal codes iff isomorphic subtrees (same level)."""
    codes: dict[tuple, int] = {}
    form = [0] * len(T.nodes)
    for i in sorted(range(len(T.nodes)), key=lambda k: T.level[k]):
        key = (T.level[i], tuple(sorted(form[c] for c in T._children[i])))
        form[i] = codes.setdefault(key, len(codes))
    return tuple(form)


def _isomorphisms(
    T: LTree, form: Sequence[int], u: int, v: int
) -> Iterator[dict[int, int]]:
    """All isomorphisms from the subtree at u onto the subtree at v."""
    if form[u] != form[v]:
        return
    kids_u = sorted(T._children[u], key=lambda c: (form[c], c))
    kids_v = sorted(T._children[v], key=lambda c: (form[c], c))
    groups_u: dict[int, list[int]] = {}
    groups_v: dict[int, list[int]] = {}
    for c in kids_u:
        groups_u.setdefault(form[c], []).append(c)
    for c in kids_v:
        groups_v.setdefault(form[c], []).append(c)

    pairings_per_form = []
    for f, us in groups_u.items():
        vs = groups_v[f]
        pairings_per_form.append([list(zip(us, p)) for p in itertools.permutations(vs)])

    for choice in itertools.product(*pairings_per_form):
        pairs = [pair for block in choice for pair in block]

        def extend(k: int, acc: dict[int, int]) -> Iterator[dict[int, int]]:
            if k == len(pairs):
                yield acc
                return
            a, b = pairs[k]
            for sub in _isomorphisms(T, form, a, b):
                merged = dict(acc)
                merged.update(sub)
                yield from extend(k + 1, merged)

        yield from extend(0, {u: v})


def aut_group(T: LTree, max_order: int = DEFAULT_MAX_ORDER) -> PermGroup:
    """All level-preserving order automorphisms of a valid tree.

    Raises:
        OrderGuardExceeded: If more than ``max_order`` automorphisms exist.
    """
    form = _canonical_forms(T)
    root = T.pos(T.top)
    found = []
    for mapping in _isomorphisms(T, form, root, root):
        found.append(Permutation(T.nodes, tuple(mapping[i] for i in range(len(T.nodes)))))
        if len(found) > max_order:
            raise OrderGuardExceeded(
                f"automorphism group exceeds max_order={max_order}", {"max_order": max_order}
            )
    for g in found:
        for i in range(len(T.nodes)):
            p = T.parent[i]
            if T.level[g.images[i]] != T.level[i] or (
                p is not None and T.parent[g.images[i]] != g.images[p]
            ):
                raise InvariantViolation("automorphism search produced a non-automorphism")
    logger.debug(f"Aut of a {len(T.nodes)}-node tree has order {len(found)}")
    return group_from_elements(T.nodes, found)


def aut_group_brute(T: LTree) -> PermGroup:
    """Filter every level-preserving bijection (at most 8 nodes)."""
    from .permgroup import brute_filter

    def keep(g: Permutation) -> bool:
        for i in range(len(T.nodes)):
            if T.level[g.images[i]] != T.level[i]:
                return False
            p = T.parent[i]
            if p is not None and T.parent[g.images[i]] != g.images[p]:
                return False
        return True

    return brute_filter(T.nodes, keep)


@dataclass(frozen=True)
class CondensedTree:
    """Quotient of a tree by its automorphism orbits.

    Attributes:
        tree (LTree): The quotient, one node per class.
        class_of (Mapping[str, str]): Original node to class id.
        members (Mapping[str, tuple[str, ...]]): Class id to its nodes.
        group (PermGroup): The Aut(T) used for the orbits.
        original (LTree): The tree that was condensed.
    """

    tree: LTree
    class_of: Mapping[str, str]
    members: Mapping[str, tuple[str, ...]]
    group: PermGroup
    original: LTree


def class_name(representative: str) -> str:
    return f"[{representative}]"


def condense(
    T: LTree, G: Optional[PermGroup] = None, max_order: int = DEFAULT_MAX_ORDER
) -> CondensedTree:
    """Δ(T): quotient by Aut(T)-orbits with induced levels and order."""
    group = G if G is not None else aut_group(T, max_order)
    blocks = orbits(group)
    class_of: dict[str, str] = {}
    members: dict[str, tuple[str, ...]] = {}
    for block in blocks:
        name = class_name(str(block[0]))
        members[name] = tuple(block)
        for t in block:
            class_of[t] = name
    entries = []
    for name, block in members.items():
        rep = block[0]
        lv = T.level[T.pos(rep)]
        levels_seen = {T.level[T.pos(t)] for t in block}
        if levels_seen != {lv}:
            raise InvariantViolation(f"class {name} spans several levels")
        p = T.parent[T.pos(rep)]
        parent_class = class_of[T.ids[p]] if p is not None else None
        for t in block:
            q = T.parent[T.pos(t)]
            if (class_of[T.ids[q]] if q is not None else None) != parent_class:
                raise InvariantViolation(f"class {name} has parents in several classes")
        entries.append((name, lv, parent_class))
    quotient = LTree.build(T.order, entries)
    return CondensedTree(quotient, class_of, members, group, T)


def C_set(
    T: LTree, t: str, G: PermGroup, orbit: Optional[Sequence[str]] = None
) -> tuple[str, ...]:
    """C_t = {t} ∪ {t' ∼ t : spl(t, t') = λ(t)}: same-orbit siblings of t."""
    if orbit is None:
        orbit = next(block for block in orbits(G) if t in block)
    parent = T.parent[T.pos(t)]
    if parent is None:
        return (t,)
    return tuple(s for s in orbit if T.parent[T.pos(s)] == parent)


def label_N(T: LTree, condensed: Optional[CondensedTree] = None) -> Skeleton:
    """The skeleton ⟨Δ(T), N^T⟩ with N_δ = |C_t| for t in δ, levels from λ.

    Raises:
        InvariantViolation: If |C_t| differs between members of one class.
    """
    cond = condensed if condensed is not None else condense(T)
    Q = cond.tree
    N: dict[str, int] = {}
    for name, block in cond.members.items():
        sizes = {len(C_set(T, t, cond.group, block)) for t in block}
        if len(sizes) != 1:
            raise InvariantViolation(
                f"N is not well defined on class {name}", {"sizes": sorted(sizes)}
            )
        N[name] = sizes.pop()
    pairs = [(a, b) for a in Q.ids for b in Q.ids if a != b and Q.leq(a, b)]
    levels = {name: Q.lam(name) for name in Q.ids}
    return Skeleton.build(Q.ids, pairs, N, levels)


def skeleton_as_tree(sk: Skeleton) -> LTree:
    """Read a treeable skeleton's level map as an L-tree over its level labels.

    Raises:
        MissingLevels: If the skeleton has no level map.
        NotTreeable: If an element has several elements directly above it.
    """
    if sk.levels is None:
        raise MissingLevels("skeleton has no level map")
    order = LinearOrder(tuple(sorted(set(sk.levels))))
    entries = []
    for d in sk.elements:
        lv = order.index_of(sk.level(d))
        above = [g for g in sk.up_set(d) if g != d and order.index_of(sk.level(g)) == lv + 1]
        if len(above) > 1:
            raise NotTreeable(f"{d} has several elements directly above it", {"element": d})
        entries.append((d, lv, above[0] if above else None))
    return LTree.build(order, entries)


def validate_skeleton(sk: Skeleton) -> ValidationReport:
    """Check that a level map, when present, is strictly monotone and reads as an L-tree.

    Without levels there is nothing beyond the order, which ``Skeleton.build``
    already checked.
    """
    if sk.levels is None:
        return ValidationReport.from_violations("skeleton", [])
    violations = [
        Violation(axiom="level-monotone", where=[a, b], message=f"{a} < {b} but levels do not rise")
        for a, b in sorted(sk.le)
        if a != b and sk.level(a) >= sk.level(b)
    ]
    if violations:
        return ValidationReport.from_violations("skeleton", violations)
    try:
        tree = skeleton_as_tree(sk)
    except NotTreeable as e:
        where = [e.details["element"]]
        violations = [Violation(axiom="single-parent", where=where, message=e.message)]
        return ValidationReport.from_violations("skeleton", violations)
    return ValidationReport.from_violations("skeleton", list(validate_ltree(tree).violations))


def is_special(T: LTree, condensed: Optional[CondensedTree] = None) -> bool:
    """Whether Δ(T) is again an L-tree (validated, not assumed)."""
    cond = condensed if condensed is not None else condense(T)
    return validate_ltree(cond.tree).ok


def is_homogeneous_tree(T: LTree, condensed: Optional[CondensedTree] = None) -> bool:
    """Whether Δ(T) is a chain (one class per level)."""
    cond = condensed if condensed is not None else condense(T)
    return len(cond.tree.nodes) == len(cond.tree.order)


def lift_branch(
    cond: CondensedTree, b: Sequence[str], l_bar: int, t: str
) -> tuple[str, ...]:
    """Lift a quotient branch through t.

    Args:
        cond (CondensedTree): The condensation of the tree.
        b (Sequence[str]): Quotient branch, one class per level index, bottom first.
        l_bar (int): Level index at which the lift passes through t.
        t (str): A member of the class b[l_bar].

    Returns:
        tuple[str, ...]: Branch b' of the original tree with b'[l_bar] = t and b'[l] ∈ b[l].

    Raises:
        NotInClass: If t is not a member of b[l_bar].
    """
    if cond.class_of.get(t) != b[l_bar]:
        raise NotInClass(f"{t} is not in class {b[l_bar]}", {"node": t, "class": b[l_bar]})
    original = cond.original
    lifted: list[str] = [""] * len(b)
    for lv in range(l_bar, len(b)):
        lifted[lv] = original.up(t, lv)
    current = t
    for lv in range(l_bar - 1, -1, -1):
        options = [c for c in original.children(current) if c in cond.members[b[lv]]]
        if not options:
            raise InvariantViolation(f"no child of {current} in class {b[lv]}")
        current = options[0]
        lifted[lv] = current
    return tuple(lifted)


@dataclass(frozen=True)
class StarReport:
    """Outcome of the (★) check; counterexample names the chain minimum and node."""

    holds: bool
    chains_checked: int
    counterexample: Optional[tuple[Optional[str], str]] = None


def property_star(T: LTree, G: Optional[PermGroup] = None) -> StarReport:
    """Check (★): below every proper upward-closed chain C sits a copy of each class under [C].

    Chains are the empty chain and the up-sets of nodes with children; finite
    chains always have a minimum so ``t̄ ≤ C`` reduces to ``t̄ ≤ min C``.
    """
    cond = condense(T, G)
    Q = cond.tree
    chains: list[Optional[str]] = [None] + [c for c in T.ids if T.children(c)]
    for c in chains:
        for t in T.ids:
            orbit = cond.members[cond.class_of[t]]
            if c is None:
                # every node lies below the empty chain
                ok = True
            elif not Q.leq(cond.class_of[t], cond.class_of[c]):
                continue
            else:
                ok = any(T.leq(s, c) for s in orbit)
            if not ok:
                return StarReport(False, len(chains), (c, t))
    return StarReport(True, len(chains))
