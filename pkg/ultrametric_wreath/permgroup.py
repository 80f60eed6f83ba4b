"""Explicit finite permutation groups.

Groups are stored as their full element sets over a declared, ordered ground
set. Every deterministic algorithm in the package enumerates ground elements in
that order, so orbit lists and element listings are reproducible.

Permutations are index tuples: ``images[i]`` is the position of the image of
the i-th ground element.
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Mapping, Optional, Sequence

from .errors import (
    DomainMismatch,
    InvariantViolation,
    NotInvariant,
    OrderGuardExceeded,
    TooLarge,
    UnknownElement,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ORDER = 1_000_000
BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class GroundSet:
    """Ordered ground set of pairwise distinct element identifiers."""

    elements: tuple[Hashable, ...]

    def __post_init__(self) -> None:
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("ground set elements must be pairwise distinct")

    @cached_property
    def index(self) -> dict[Hashable, int]:
        return {e: i for i, e in enumerate(self.elements)}

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x: object) -> bool:
        return x in self.index

    def position(self, x: Hashable) -> int:
        """Return the canonical position of ``x``.

        Raises:
            UnknownElement: If ``x`` is not in the ground set.
        """
        try:
            return self.index[x]
        except KeyError as e:
            raise UnknownElement(f"Unknown element: {x!r}", {"element": repr(x)}) from e


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection of a ground set onto itself."""

    ground: GroundSet
    images: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.images) != len(self.ground) or sorted(self.images) != list(
            range(len(self.ground))
        ):
            raise ValueError("images must be a bijection of the ground set")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return self.images == other.images and (
            self.ground is other.ground or self.ground == other.ground
        )

    def __hash__(self) -> int:
        return hash(self.images)

    def __lt__(self, other: "Permutation") -> bool:
        return self.images < other.images

    def __call__(self, x: Hashable) -> Hashable:
        return self.ground.elements[self.images[self.ground.position(x)]]

    @classmethod
    def identity(cls, ground: GroundSet) -> "Permutation":
        return cls(ground, tuple(range(len(ground))))

    @classmethod
    def from_mapping(cls, ground: GroundSet, mapping: Mapping[Hashable, Hashable]) -> "Permutation":
        """Build a permutation from a partial map; unmapped elements are fixed."""
        images = list(range(len(ground)))
        for src, dst in mapping.items():
            images[ground.position(src)] = ground.position(dst)
        return cls(ground, tuple(images))

    @classmethod
    def from_cycles(cls, ground: GroundSet, cycles: Iterable[Sequence[Hashable]]) -> "Permutation":
        """Build a permutation from disjoint cycles, e.g. ``[("a", "b", "c")]``."""
        mapping: dict[Hashable, Hashable] = {}
        for cycle in cycles:
            for i, x in enumerate(cycle):
                mapping[x] = cycle[(i + 1) % len(cycle)]
        return cls.from_mapping(ground, mapping)

    def compose(self, other: "Permutation") -> "Permutation":
        """Return ``self ∘ other`` (apply ``other`` first)."""
        mine = self.images
        return Permutation(self.ground, tuple(mine[j] for j in other.images))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.images)
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(self.ground, tuple(inv))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def as_mapping(self) -> dict[Hashable, Hashable]:
        els = self.ground.elements
        return {els[i]: els[j] for i, j in enumerate(self.images)}

    def one_line(self) -> list[str]:
        """Serialize as one-line notation over the canonical ground order."""
        els = self.ground.elements
        return [str(els[j]) for j in self.images]


@dataclass(frozen=True)
class PermGroup:
    """A finite permutation group given by its full element set.

    Attributes:
        ground (GroundSet): The set acted on.
        elements (tuple[Permutation, ...]): All group elements, sorted by one-line images.
        generators (Optional[tuple[Permutation, ...]]): Generators when built by closure.
    """

    ground: GroundSet
    elements: tuple[Permutation, ...]
    generators: Optional[tuple[Permutation, ...]] = field(default=None, compare=False)

    @cached_property
    def element_set(self) -> frozenset[Permutation]:
        return frozenset(self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, g: object) -> bool:
        return g in self.element_set

    def __iter__(self):
        return iter(self.elements)

    def same_elements(self, other: "PermGroup") -> bool:
        """Set equality of two groups over equal ground sets."""
        return self.ground == other.ground and self.element_set == other.element_set


def trivial_group(ground: GroundSet) -> PermGroup:
    return PermGroup(ground, (Permutation.identity(ground),), ())


def group_from_elements(
    ground: GroundSet,
    elements: Iterable[Permutation],
    generators: Optional[Sequence[Permutation]] = None,
) -> PermGroup:
    """Wrap an element collection already known to be a group."""
    unique = sorted(set(elements))
    return PermGroup(ground, tuple(unique), tuple(generators) if generators is not None else None)


def closure(
    generators: Sequence[Permutation],
    max_order: int = DEFAULT_MAX_ORDER,
    ground: Optional[GroundSet] = None,
) -> PermGroup:
    """Generate the subgroup spanned by ``generators`` by breadth-first products.

    Args:
        generators (Sequence[Permutation]): Generators sharing one ground set.
        max_order (int): Abort once the closure exceeds this many elements.
        ground (Optional[GroundSet]): Ground set, required when there are no generators.

    Returns:
        PermGroup: The generated group with the generator list retained.

    Raises:
        DomainMismatch: If generators disagree on their ground set.
        OrderGuardExceeded: If the closure grows beyond ``max_order``.
    """
    if ground is None:
        if not generators:
            raise DomainMismatch("closure of an empty generator list needs a ground set")
        ground = generators[0].ground
    for g in generators:
        if g.ground != ground:
            raise DomainMismatch("generators disagree on their ground set")

    identity = Permutation.identity(ground)
    seen = {identity}
    queue = deque([identity])
    while queue:
        h = queue.popleft()
        for g in generators:
            gh = g.compose(h)
            if gh not in seen:
                seen.add(gh)
                if len(seen) > max_order:
                    raise OrderGuardExceeded(
                        f"closure exceeded max_order={max_order}", {"max_order": max_order}
                    )
                queue.append(gh)
    logger.debug(f"closure of {len(generators)} generators has order {len(seen)}")
    return group_from_elements(ground, seen, generators)


def symmetric_group(ground: GroundSet, max_order: int = DEFAULT_MAX_ORDER) -> PermGroup:
    """Sym(ground) generated by a transposition and a full cycle."""
    n = len(ground)
    if n <= 1:
        return trivial_group(ground)
    els = ground.elements
    gens = [Permutation.from_cycles(ground, [(els[0], els[1])])]
    if n > 2:
        gens.append(Permutation.from_cycles(ground, [els]))
    return closure(gens, max_order=max_order, ground=ground)


def brute_filter(
    ground: GroundSet,
    keep: Callable[[Permutation], bool],
    limit: int = BRUTE_FORCE_LIMIT,
) -> PermGroup:
    """Filter all |ground|! permutations through ``keep``.

    Raises:
        TooLarge: If the ground set has more than ``limit`` elements.
    """
    if len(ground) > limit:
        raise TooLarge(
            f"brute force over {len(ground)} elements exceeds the limit of {limit}",
            {"size": len(ground), "limit": limit},
        )
    kept = []
    for images in itertools.permutations(range(len(ground))):
        g = Permutation(ground, images)
        if keep(g):
            kept.append(g)
    return group_from_elements(ground, kept)


def orbits(G: PermGroup) -> list[tuple[Hashable, ...]]:
    """Partition the ground set into G-orbits, blocks ordered by least element."""
    n = len(G.ground)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    acting = G.generators if G.generators else G.elements
    for g in acting:
        for i, j in enumerate(g.images):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    blocks: dict[int, list[Hashable]] = {}
    for i, x in enumerate(G.ground.elements):
        blocks.setdefault(find(i), []).append(x)
    return [tuple(blocks[r]) for r in sorted(blocks)]


def is_invariant(G: PermGroup, block: Iterable[Hashable]) -> bool:
    positions = {G.ground.position(x) for x in block}
    return all(g.images[i] in positions for g in G.elements for i in positions)


def is_transitive(G: PermGroup, block: Optional[Iterable[Hashable]] = None) -> bool:
    """Whether ``block`` (default: the whole ground set) is a single G-orbit.

    Raises:
        NotInvariant: If G does not map the block onto itself.
    """
    members = tuple(G.ground.elements if block is None else block)
    if not members:
        raise ValueError("block cannot be empty")
    if not is_invariant(G, members):
        raise NotInvariant("block is not G-invariant", {"block": [str(x) for x in members]})
    start = G.ground.position(members[0])
    reached = {g.images[start] for g in G.elements}
    return len(reached) == len(set(members))


def stabilizer(G: PermGroup, x: Hashable) -> PermGroup:
    """Subgroup of elements fixing ``x``."""
    i = G.ground.position(x)
    return group_from_elements(G.ground, (g for g in G.elements if g.images[i] == i))


def restrict_to_block(G: PermGroup, block: Sequence[Hashable]) -> PermGroup:
    """Induced action of G on an invariant block, as a group over that block.

    Raises:
        NotInvariant: If the block is not G-invariant.
    """
    if not is_invariant(G, block):
        raise NotInvariant("block is not G-invariant", {"block": [str(x) for x in block]})
    sub = GroundSet(tuple(block))
    positions = [G.ground.position(x) for x in block]
    back = {p: k for k, p in enumerate(positions)}
    images = {Permutation(sub, tuple(back[g.images[p]] for p in positions)) for g in G.elements}
    return group_from_elements(sub, images)


@dataclass(frozen=True)
class IsoWitness:
    """An explicit point bijection claimed to conjugate ``source`` onto ``target``.

    Attributes:
        source (PermGroup): Group on the domain of the bijection.
        target (PermGroup): Group on the codomain.
        bijection (tuple[tuple[Hashable, Hashable], ...]): Pairs (x, beta(x)) in source order.
        verified (bool): Whether conjugation maps source.elements bijectively onto target.elements.
        failure (Optional[Permutation]): First source element whose conjugate is not in target.
        reason (str): Short description of the outcome.
        induced (bool): True when beta lands in an invariant faithful block of the target ground.
    """

    source: PermGroup
    target: PermGroup
    bijection: tuple[tuple[Hashable, Hashable], ...]
    verified: bool
    failure: Optional[Permutation] = None
    reason: str = "ok"
    induced: bool = False

    @property
    def beta(self) -> dict[Hashable, Hashable]:
        return dict(self.bijection)

    def inverted(self) -> "IsoWitness":
        """Verify the reverse witness (target, source, beta^-1)."""
        if self.induced:
            raise ValueError("induced witnesses cannot be inverted")
        return verify_conjugation(self.target, self.source, {y: x for x, y in self.bijection})


def _conjugate_all(
    G: PermGroup,
    image_ground: GroundSet,
    beta_pos: list[int],
    H_block: PermGroup,
) -> tuple[bool, Optional[Permutation], str]:
    produced = set()
    for g in G.elements:
        images = [0] * len(beta_pos)
        for i, j in enumerate(g.images):
            images[beta_pos[i]] = beta_pos[j]
        conj = Permutation(image_ground, tuple(images))
        if conj not in H_block:
            return False, g, "conjugate not in target"
        produced.add(conj)
    if len(produced) != H_block.order:
        return False, None, "conjugation is not onto the target"
    return True, None, "ok"


def verify_conjugation(G: PermGroup, H: PermGroup, beta: Mapping[Hashable, Hashable]) -> IsoWitness:
    """Check that ``g ↦ β∘g∘β⁻¹`` maps G bijectively onto H.

    Args:
        G (PermGroup): Source group.
        H (PermGroup): Target group.
        beta (Mapping[Hashable, Hashable]): Bijection from G's ground set onto H's.

    Returns:
        IsoWitness: Verification record; failure is data, never an exception.
    """
    pairs = tuple((x, beta[x]) for x in G.ground.elements if x in beta)

    def fail(reason: str, g: Optional[Permutation] = None) -> IsoWitness:
        return IsoWitness(G, H, pairs, False, g, reason)

    if len(pairs) != len(G.ground) or len(beta) != len(G.ground):
        return fail("beta is not total on the source ground set")
    targets = [y for _, y in pairs]
    if len(set(targets)) != len(targets) or set(targets) != set(H.ground.elements):
        return fail("beta is not a bijection onto the target ground set")
    if G.order != H.order:
        return fail(f"orders differ: {G.order} vs {H.order}")

    beta_pos = [H.ground.position(y) for y in targets]
    ok, g, reason = _conjugate_all(G, H.ground, beta_pos, H)
    return IsoWitness(G, H, pairs, ok, g, reason)


def verify_induced_conjugation(
    G: PermGroup, H: PermGroup, beta: Mapping[Hashable, Hashable]
) -> IsoWitness:
    """Like ``verify_conjugation`` when β lands in an H-invariant block.

    The block must carry a faithful H-action, so restriction to it is an
    isomorphism and conjugation into the restricted group suffices.
    """
    pairs = tuple((x, beta[x]) for x in G.ground.elements if x in beta)

    def fail(reason: str) -> IsoWitness:
        return IsoWitness(G, H, pairs, False, None, reason, induced=True)

    if len(pairs) != len(G.ground):
        return fail("beta is not total on the source ground set")
    block = [y for _, y in pairs]
    if len(set(block)) != len(block) or any(y not in H.ground for y in block):
        return fail("beta is not injective into the target ground set")
    if not is_invariant(H, block):
        return fail("image of beta is not target-invariant")
    restricted = restrict_to_block(H, block)
    if restricted.order != H.order:
        return fail("target does not act faithfully on the image of beta")
    if G.order != H.order:
        return fail(f"orders differ: {G.order} vs {H.order}")
    beta_pos = list(range(len(block)))
    ok, g, reason = _conjugate_all(G, restricted.ground, beta_pos, restricted)
    return IsoWitness(G, H, pairs, ok, g, reason, induced=True)


def compose_witnesses(first: IsoWitness, second: IsoWitness) -> IsoWitness:
    """Verify the composite bijection of two plain witnesses directly."""
    if first.induced or second.induced:
        raise ValueError("only plain witnesses compose")
    b1, b2 = first.beta, second.beta
    return verify_conjugation(first.source, second.target, {x: b2[b1[x]] for x in b1})


def small_generating_set(
    G: PermGroup, max_order: int = DEFAULT_MAX_ORDER
) -> tuple[Permutation, ...]:
    """Greedy generating set in canonical element order."""
    if G.generators:
        return G.generators
    gens: list[Permutation] = []
    current = trivial_group(G.ground)
    for g in G.elements:
        if g not in current:
            gens.append(g)
            current = closure(gens, max_order=max_order, ground=G.ground)
            if current.order == G.order:
                break
    if current.order != G.order:
        raise InvariantViolation("greedy generators do not span the group")
    return tuple(gens)
