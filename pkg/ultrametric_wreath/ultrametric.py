"""Finite ultrametric spaces with exact rational distances.

Balls are open: ``ball(x, l) = {y : d(x, y) < l}``. All distances are
``fractions.Fraction`` values, never floats.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Optional, Sequence, Union

import networkx as nx

from .errors import InvariantViolation, NotAComponent, OrderGuardExceeded, UnknownPoint
from .models import ValidationReport, Violation
from .permgroup import (
    DEFAULT_MAX_ORDER,
    GroundSet,
    Permutation,
    PermGroup,
    brute_filter,
    group_from_elements,
    orbits,
)

logger = logging.getLogger(__name__)

RationalLike = Union[Fraction, int, str]
CROSS_CHECK_LIMIT = 6


def as_rational(value: RationalLike) -> Fraction:
    """Parse ``"p/q"``, integer strings, ints or Fractions exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floating point distances are not accepted")
    return Fraction(str(value).strip()) if isinstance(value, str) else Fraction(value)


def format_rational(value: Fraction) -> str:
    return str(value)


@dataclass(frozen=True)
class UltraSpace:
    """A finite point set with a rational distance matrix.

    Attributes:
        points (GroundSet): The points in canonical order.
        dist (tuple[tuple[Fraction, ...], ...]): Matrix indexed by point positions.
    """

    points: GroundSet
    dist: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def from_matrix(
        cls, points: Sequence[Hashable], matrix: Sequence[Sequence[RationalLike]]
    ) -> "UltraSpace":
        ground = GroundSet(tuple(points))
        if len(matrix) != len(ground) or any(len(row) != len(ground) for row in matrix):
            raise ValueError("distance matrix must be square over the points")
        return cls(ground, tuple(tuple(as_rational(v) for v in row) for row in matrix))

    @classmethod
    def from_pairs(
        cls,
        points: Sequence[Hashable],
        pairs: Mapping[tuple[Hashable, Hashable], RationalLike],
        default: Optional[RationalLike] = None,
    ) -> "UltraSpace":
        """Build a symmetric space from unordered pair distances.

        Pairs missing from ``pairs`` take ``default``.
        """
        n = len(points)
        matrix = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                key = (points[i], points[j])
                if key in pairs:
                    value = pairs[key]
                elif key[::-1] in pairs:
                    value = pairs[key[::-1]]
                elif default is not None:
                    value = default
                else:
                    raise ValueError(f"missing distance for pair {key}")
                matrix[i][j] = matrix[j][i] = as_rational(value)
        return cls.from_matrix(points, matrix)

    def d(self, x: Hashable, y: Hashable) -> Fraction:
        return self.dist[self._pos(x)][self._pos(y)]

    def _pos(self, x: Hashable) -> int:
        if x not in self.points:
            raise UnknownPoint(f"Unknown point: {x!r}", {"point": repr(x)})
        return self.points.index[x]

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def distance_set(self) -> tuple[Fraction, ...]:
        """Sorted distinct nonzero distances D."""
        n = len(self.points)
        return tuple(sorted({self.dist[i][j] for i in range(n) for j in range(i + 1, n)}))

    @cached_property
    def profiles(self) -> tuple[tuple[Fraction, ...], ...]:
        """Sorted distance multiset of each point (an isometry invariant)."""
        return tuple(tuple(sorted(row)) for row in self.dist)

    def preserves(self, g: Permutation) -> bool:
        """Whether the permutation ``g`` of the points is distance preserving."""
        n = len(self.points)
        im = g.images
        return all(
            self.dist[im[i]][im[j]] == self.dist[i][j] for i in range(n) for j in range(i + 1, n)
        )


def validate_space(U: UltraSpace) -> ValidationReport:
    """Check every metric and ultrametric axiom, naming offending tuples."""
    els = [str(p) for p in U.points]
    n = len(els)
    D = U.dist
    violations: list[Violation] = []
    for i in range(n):
        if D[i][i] != 0:
            violations.append(
                Violation(
                    axiom="zero-diagonal",
                    where=[els[i]],
                    message=f"d({els[i]},{els[i]}) = {D[i][i]}",
                )
            )
    for i in range(n):
        for j in range(i + 1, n):
            if D[i][j] != D[j][i]:
                violations.append(
                    Violation(
                        axiom="symmetry",
                        where=[els[i], els[j]],
                        message=(
                            f"d({els[i]},{els[j]}) = {D[i][j]} "
                            f"but d({els[j]},{els[i]}) = {D[j][i]}"
                        ),
                    )
                )
            if D[i][j] <= 0:
                violations.append(
                    Violation(
                        axiom="positivity",
                        where=[els[i], els[j]],
                        message=f"d({els[i]},{els[j]}) = {D[i][j]} is not positive",
                    )
                )
    for i in range(n):
        for k in range(i + 1, n):
            for j in range(n):
                if j in (i, k):
                    continue
                bound = max(D[i][j], D[j][k])
                if D[i][k] > bound:
                    violations.append(
                        Violation(
                            axiom="strong-triangle",
                            where=[els[i], els[j], els[k]],
                            message=(
                                f"d({els[i]},{els[k]}) = {D[i][k]} > "
                                f"max(d({els[i]},{els[j]}), d({els[j]},{els[k]})) = {bound}"
                            ),
                        )
                    )
    return ValidationReport.from_violations("space", violations)


def ball(U: UltraSpace, x: Hashable, radius: RationalLike) -> tuple[Hashable, ...]:
    """Open ball ``{y : d(x, y) < radius}`` in canonical point order.

    Raises:
        UnknownPoint: If ``x`` is not a point of U.
        ValueError: If the radius is not positive.
    """
    r = as_rational(radius)
    if r <= 0:
        raise ValueError("ball radius must be positive")
    row = U.dist[U._pos(x)]
    return tuple(p for p, dxy in zip(U.points, row) if dxy < r)


def iso_group(
    U: UltraSpace, max_order: int = DEFAULT_MAX_ORDER, cross_check: bool = True
) -> PermGroup:
    """All isometries of U, by backtracking with distance-profile pruning.

    Candidates for the image of a point must share its sorted distance
    multiset and agree on distances to every point already placed. Every
    result is re-checked; for at most six points it is also compared with the
    plain brute filter.

    Raises:
        OrderGuardExceeded: If more than ``max_order`` isometries exist.
    """
    n = len(U.points)
    D = U.dist
    prof = U.profiles
    candidates = [[j for j in range(n) if prof[j] == prof[i]] for i in range(n)]
    found: list[Permutation] = []
    image = [-1] * n
    used = [False] * n

    def extend(i: int) -> None:
        if i == n:
            found.append(Permutation(U.points, tuple(image)))
            if len(found) > max_order:
                raise OrderGuardExceeded(
                    f"isometry group exceeds max_order={max_order}", {"max_order": max_order}
                )
            return
        for j in candidates[i]:
            if used[j]:
                continue
            if all(D[image[p]][j] == D[p][i] for p in range(i)):
                image[i] = j
                used[j] = True
                extend(i + 1)
                used[j] = False
        image[i] = -1

    extend(0)
    for g in found:
        if not U.preserves(g):
            raise InvariantViolation("backtracking produced a non-isometry")
    G = group_from_elements(U.points, found)
    if cross_check and n <= CROSS_CHECK_LIMIT:
        oracle = iso_group_brute(U)
        if not G.same_elements(oracle):
            raise InvariantViolation("isometry search disagrees with the brute filter")
    logger.debug(f"Iso of a {n}-point space has order {G.order}")
    return G


def iso_group_brute(U: UltraSpace) -> PermGroup:
    """Filter all permutations of the points by distance preservation (at most 8 points)."""
    return brute_filter(U.points, U.preserves)


def components(U: UltraSpace, G: Optional[PermGroup] = None) -> list[tuple[Hashable, ...]]:
    """Homogeneous components: the Iso(U)-orbits in canonical order."""
    return orbits(G if G is not None else iso_group(U))


def is_homogeneous(U: UltraSpace, G: Optional[PermGroup] = None) -> bool:
    return len(components(U, G)) == 1


@dataclass(frozen=True)
class ComponentPair:
    """Distance between two components with a pair of points realizing it."""

    comp_a: tuple[Hashable, ...]
    comp_b: tuple[Hashable, ...]
    distance: Fraction
    witness: tuple[Hashable, Hashable]


def component_distance(
    U: UltraSpace,
    A: Iterable[Hashable],
    B: Iterable[Hashable],
    G: Optional[PermGroup] = None,
) -> ComponentPair:
    """Minimum cross distance between two distinct components.

    Raises:
        NotAComponent: If A or B is not an Iso-orbit, or A equals B.
    """
    comps = {frozenset(c): c for c in components(U, G)}
    a, b = frozenset(A), frozenset(B)
    for side in (a, b):
        if side not in comps:
            raise NotAComponent(
                "point set is not a homogeneous component", {"points": sorted(map(str, side))}
            )
    if a == b:
        raise NotAComponent("components must be distinct", {"points": sorted(map(str, a))})
    best: Optional[tuple[Fraction, Hashable, Hashable]] = None
    for x in comps[a]:
        for y in comps[b]:
            dxy = U.d(x, y)
            if best is None or dxy < best[0]:
                best = (dxy, x, y)
    assert best is not None
    return ComponentPair(comps[a], comps[b], best[0], (best[1], best[2]))


def is_exact(U: UltraSpace, G: Optional[PermGroup] = None) -> bool:
    """Whether every two components have their infimum distance attained."""
    comps = components(U, G)
    for i, A in enumerate(comps):
        for B in comps[i + 1 :]:
            cross = [U.d(x, y) for x in A for y in B]
            inf = min(cross)
            if not any(value == inf for value in cross):
                return False
    return True


def equidistance_graph(U: UltraSpace, r: Fraction) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(U.points)))
    n = len(U.points)
    graph.add_edges_from(
        (i, j) for i in range(n) for j in range(i + 1, n) if U.dist[i][j] == r
    )
    return graph


def max_discrete_subset(U: UltraSpace, r: RationalLike) -> tuple[Hashable, ...]:
    """A largest r-discrete subset (all pairwise distances equal r)."""
    graph = equidistance_graph(U, as_rational(r))
    best: list[int] = []
    for clique in nx.find_cliques(graph):
        if len(clique) > len(best) or (len(clique) == len(best) and sorted(clique) < sorted(best)):
            best = clique
    return tuple(U.points.elements[i] for i in sorted(best))


def wideness_profile(U: UltraSpace, m: int) -> dict[Fraction, bool]:
    """For each r in D, whether U has an r-discrete subset of at least m points."""
    if m < 1:
        raise ValueError("m must be positive")
    return {r: len(max_discrete_subset(U, r)) >= m for r in U.distance_set}


def is_r_discrete(U: UltraSpace, r: RationalLike) -> bool:
    """Whether all pairwise distances of U equal r."""
    value = as_rational(r)
    n = len(U.points)
    return all(U.dist[i][j] == value for i in range(n) for j in range(i + 1, n))
