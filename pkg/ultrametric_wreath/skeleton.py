"""Labeled finite posets ⟨Δ, N⟩ and the sequences indexed by their up-sets.

The order relation is stored as its reflexive transitive closure, computed
once with networkx. Element order as given is the canonical enumeration used
for up-sets and for sequence coordinates.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import networkx as nx

from .errors import MissingLevels, UnknownElement

logger = logging.getLogger(__name__)


class SeqOver(NamedTuple):
    """A sequence over the up-set of ``base``.

    ``values`` lists one entry per element of ``up_set(base)`` in canonical
    order; entry for gamma is in ``range(N[gamma])``.
    """

    base: str
    values: tuple[int, ...]


@dataclass(frozen=True)
class Skeleton:
    """A finite partial order with a positive label N per element.

    Attributes:
        elements (tuple[str, ...]): Canonical element order.
        le (frozenset[tuple[str, str]]): Pairs (a, b) with a ≤ b, reflexive and transitive.
        N (tuple[int, ...]): Labels aligned with ``elements``.
        levels (Optional[tuple[Fraction, ...]]): Treeability witness aligned with ``elements``.
    """

    elements: tuple[str, ...]
    le: frozenset[tuple[str, str]]
    N: tuple[int, ...]
    levels: Optional[tuple[Fraction, ...]] = None

    @classmethod
    def build(
        cls,
        elements: Sequence[str],
        pairs: Iterable[tuple[str, str]],
        N: Mapping[str, int],
        levels: Optional[Mapping[str, Fraction]] = None,
    ) -> "Skeleton":
        """Close ``pairs`` under transitivity and reflexivity.

        Raises:
            ValueError: If the relation has a cycle, mentions unknown elements or N is invalid.
        """
        elements = tuple(elements)
        if len(set(elements)) != len(elements):
            raise ValueError("skeleton elements must be distinct")
        known = set(elements)
        graph = nx.DiGraph()
        graph.add_nodes_from(elements)
        for a, b in pairs:
            if a not in known or b not in known:
                raise ValueError(f"order pair ({a}, {b}) mentions an unknown element")
            if a != b:
                graph.add_edge(a, b)
        if not nx.is_directed_acyclic_graph(graph):
            raise ValueError("order relation is not antisymmetric (cycle found)")
        closed = nx.transitive_closure_dag(graph)
        le = frozenset(closed.edges()) | frozenset((a, a) for a in elements)
        if set(N) != known or any(N[e] < 1 for e in elements):
            raise ValueError("N must assign a positive integer to every element")
        level_tuple = None
        if levels is not None:
            if set(levels) != known:
                raise ValueError("levels must label every element")
            level_tuple = tuple(Fraction(levels[e]) for e in elements)
        return cls(elements, le, tuple(N[e] for e in elements), level_tuple)

    @classmethod
    def chain(cls, N: Sequence[int], names: Optional[Sequence[str]] = None) -> "Skeleton":
        """Chain d1 < d2 < ... (bottom first) with levels 1..n."""
        names = tuple(names) if names is not None else tuple(f"d{i + 1}" for i in range(len(N)))
        pairs = [(names[i], names[i + 1]) for i in range(len(names) - 1)]
        levels = {name: Fraction(i + 1) for i, name in enumerate(names)}
        return cls.build(names, pairs, dict(zip(names, N)), levels)

    @cached_property
    def index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.elements)}

    def __len__(self) -> int:
        return len(self.elements)

    def n(self, delta: str) -> int:
        return self.N[self.index[delta]]

    def level(self, delta: str) -> Fraction:
        if self.levels is None:
            raise MissingLevels("skeleton has no level map")
        return self.levels[self.index[delta]]

    def leq(self, a: str, b: str) -> bool:
        return (a, b) in self.le

    def lt(self, a: str, b: str) -> bool:
        return a != b and (a, b) in self.le

    @cached_property
    def up_sets(self) -> dict[str, tuple[str, ...]]:
        return {d: tuple(g for g in self.elements if (d, g) in self.le) for d in self.elements}

    def up_set(self, delta: str) -> tuple[str, ...]:
        """Elements γ ≥ δ in canonical order."""
        return self.up_sets[delta]

    def position(self, delta: str, gamma: str) -> int:
        """Coordinate of γ inside sequences over δ."""
        return self.up_sets[delta].index(gamma)

    @cached_property
    def _restriction(self) -> dict[tuple[str, str], tuple[int, ...]]:
        table = {}
        for d in self.elements:
            ups = self.up_sets[d]
            for g in ups:
                table[(d, g)] = tuple(ups.index(x) for x in self.up_sets[g])
        return table

    def restrict(self, z: SeqOver, gamma: str) -> SeqOver:
        """z|_γ for γ ≥ z.base."""
        try:
            picks = self._restriction[(z.base, gamma)]
        except KeyError as e:
            raise UnknownElement(
                f"{gamma} is not above {z.base}", {"base": z.base, "target": gamma}
            ) from e
        return SeqOver(gamma, tuple(z.values[p] for p in picks))

    def value(self, z: SeqOver, gamma: str) -> int:
        return z.values[self.position(z.base, gamma)]

    def perturb(self, z: SeqOver, i: int) -> SeqOver:
        """z^δ_i: replace the bottom coordinate z(δ) by i."""
        pos = self.position(z.base, z.base)
        values = list(z.values)
        values[pos] = i
        return SeqOver(z.base, tuple(values))

    def minimal_elements(self) -> tuple[str, ...]:
        return tuple(d for d in self.elements if not any(self.lt(e, d) for e in self.elements))

    def maximal_elements(self) -> tuple[str, ...]:
        return tuple(d for d in self.elements if not any(self.lt(d, e) for e in self.elements))

    def is_linear(self) -> bool:
        return all(self.leq(a, b) or self.leq(b, a) for a in self.elements for b in self.elements)

    def linear_order(self) -> tuple[str, ...]:
        """Elements sorted bottom to top (requires a chain)."""
        return tuple(sorted(self.elements, key=lambda d: len(self.up_sets[d]), reverse=True))

    def covers(self) -> list[tuple[str, str]]:
        """Hasse edges (a, b) with a < b and nothing strictly between."""
        result = []
        for a in self.elements:
            for b in self.elements:
                if self.lt(a, b) and not any(
                    self.lt(a, c) and self.lt(c, b) for c in self.elements
                ):
                    result.append((a, b))
        return result

    def top_down(self) -> tuple[str, ...]:
        """Elements ordered so that every γ > δ comes before δ."""
        return tuple(
            sorted(self.elements, key=lambda d: (len(self.up_sets[d]), self.index[d]))
        )

    def with_N(self, N: Mapping[str, int]) -> "Skeleton":
        return Skeleton(self.elements, self.le, tuple(N[e] for e in self.elements), self.levels)

    def sub_skeleton(self, keep: Sequence[str]) -> "Skeleton":
        """Induced sub-poset on ``keep`` (canonical order preserved)."""
        kept = tuple(e for e in self.elements if e in set(keep))
        le = frozenset((a, b) for a, b in self.le if a in kept and b in kept)
        levels = None
        if self.levels is not None:
            levels = tuple(self.level(e) for e in kept)
        return Skeleton(kept, le, tuple(self.n(e) for e in kept), levels)


def format_seq(sk: Skeleton, z: SeqOver) -> str:
    """Stable label like ``d1(0,1,0)``."""
    return f"{z.base}({','.join(str(v) for v in z.values)})"


def seq_as_map(sk: Skeleton, z: SeqOver) -> dict[str, int]:
    return dict(zip(sk.up_set(z.base), z.values))


def seq_from_map(sk: Skeleton, base: str, values: Mapping[str, int]) -> SeqOver:
    """Build a SeqOver from a coordinate map over the up-set of ``base``.

    Raises:
        ValueError: If the map is not total on the up-set or a value is out of range.
    """
    ups = sk.up_set(base)
    if set(values) != set(ups):
        raise ValueError(f"sequence over {base} must cover exactly {list(ups)}")
    for g in ups:
        if not 0 <= values[g] < sk.n(g):
            raise ValueError(f"value {values[g]} out of range for {g} (N = {sk.n(g)})")
    return SeqOver(base, tuple(values[g] for g in ups))
