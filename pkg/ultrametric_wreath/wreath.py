"""Generalized and projective wreath products over finite skeletons.

Every flavor of the product is computed by one engine: a bundle (global
domain, family of local domains, or projection system) is converted to a
projection system, and the group is enumerated as the block-preserving
automorphisms of its canonical poset whose coordinate maps lie in H_δ.

Sequences over up-sets are ``SeqOver`` values; global domain elements are
plain tuples aligned with ``Skeleton.elements``. 0 is the support-zero value
of every N_δ.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Iterator, Mapping, NamedTuple, Optional, Protocol, Union

import networkx as nx

from .errors import (
    DepthTooSmall,
    DomainMismatch,
    InvalidSystem,
    InvariantViolation,
    MissingLevels,
    NotFull,
    NotTransitive,
    NotTreeable,
    OrderGuardExceeded,
    SchemaError,
    TooLarge,
    UpSetTooLarge,
)
from .ltree import (
    LinearOrder,
    LTree,
    aut_group,
    skeleton_as_tree,
    validate_ltree,
    validate_skeleton,
)
from .models import ValidationReport, Violation
from .permgroup import (
    BRUTE_FORCE_LIMIT,
    DEFAULT_MAX_ORDER,
    GroundSet,
    IsoWitness,
    Permutation,
    PermGroup,
    brute_filter,
    group_from_elements,
    is_transitive,
    orbits,
    verify_conjugation,
    verify_induced_conjugation,
)
from .skeleton import SeqOver, Skeleton, format_seq

logger = logging.getLogger(__name__)

SUPPORT_TAGS = ("fin", "lf", "wsp", "max")
UP_SET_LIMIT = 12

GlobalPoint = tuple[int, ...]
CoordinateGroups = Optional[Mapping[str, PermGroup]]


# Support families


class SupportFlags(NamedTuple):
    fin: bool
    lf: bool
    wsp: bool
    max: bool


class SupportOracle(Protocol):
    """Answers the four support predicates for subsets of some poset."""

    def is_finite(self, A: Any) -> bool: ...

    def is_locally_finite(self, A: Any) -> bool: ...

    def is_weakly_supported(self, A: Any) -> bool: ...

    def has_maximum_condition(self, A: Any) -> bool: ...


@dataclass(frozen=True)
class FiniteSupports:
    """Support predicates over a finite skeleton, each read off its definition.

    Infinite chains inside a finite A can only run around a cycle of the strict
    order, so Wsp looks for descending cycles with a lower bound and Max for
    ascending cycles. Both are absent on an antisymmetric skeleton.
    """

    skeleton: Skeleton

    def _strict_graph(self, A: Iterable[str]) -> nx.DiGraph:
        members = [d for d in self.skeleton.elements if d in set(A)]
        graph = nx.DiGraph()
        graph.add_nodes_from(members)
        graph.add_edges_from((a, b) for a in members for b in members if self.skeleton.lt(a, b))
        return graph

    def is_finite(self, A: Iterable[str]) -> bool:
        """Subsets of a finite skeleton are finite; foreign elements are not supports."""
        return all(d in self.skeleton.index for d in A)

    def is_locally_finite(self, A: Iterable[str]) -> bool:
        members = set(A)
        return all(
            self.is_finite(members & set(self.skeleton.up_set(d))) for d in self.skeleton.elements
        )

    def is_weakly_supported(self, A: Iterable[str]) -> bool:
        descending = self._strict_graph(A).reverse(copy=True)
        for cycle in nx.simple_cycles(descending):
            if any(all(self.skeleton.leq(b, c) for c in cycle) for b in self.skeleton.elements):
                return False
        return True

    def has_maximum_condition(self, A: Iterable[str]) -> bool:
        return nx.is_directed_acyclic_graph(self._strict_graph(A))


def support_kind(A: Any, oracle: SupportOracle) -> SupportFlags:
    """Evaluate Fin, LF, Wsp and Max membership of the support set A.

    Raises:
        InvariantViolation: If the answers break Fin ⊆ LF ⊆ Wsp ⊆ Max.
    """
    flags = SupportFlags(
        fin=oracle.is_finite(A),
        lf=oracle.is_locally_finite(A),
        wsp=oracle.is_weakly_supported(A),
        max=oracle.has_maximum_condition(A),
    )
    chain = (flags.fin, flags.lf, flags.wsp, flags.max)
    if any(a and not b for a, b in zip(chain, chain[1:])):
        raise InvariantViolation(
            "support predicates break Fin ⊆ LF ⊆ Wsp ⊆ Max", {"flags": flags._asdict()}
        )
    return flags


def support(sk: Skeleton, x: GlobalPoint) -> frozenset[str]:
    return frozenset(d for d, v in zip(sk.elements, x) if v != 0)


def restrict_global(sk: Skeleton, x: GlobalPoint, delta: str) -> SeqOver:
    """x|_δ as a sequence over the up-set of δ."""
    return SeqOver(delta, tuple(x[sk.index[g]] for g in sk.up_set(delta)))


def product_size(sk: Skeleton) -> int:
    size = 1
    for n in sk.N:
        size *= n
    return size


def domain_from_supports(
    sk: Skeleton, tag: str = "lf", max_size: int = DEFAULT_MAX_ORDER
) -> tuple[GlobalPoint, ...]:
    """S^A: every x in ∏ N_δ whose support is admissible for ``tag``.

    Raises:
        ValueError: If ``tag`` is not one of fin, lf, wsp, max.
        TooLarge: If the product has more than ``max_size`` points.
        InvariantViolation: If the four support families disagree on a finite skeleton.
    """
    if tag not in SUPPORT_TAGS:
        raise ValueError(f"support tag must be one of {', '.join(SUPPORT_TAGS)}")
    size = product_size(sk)
    if size > max_size:
        raise TooLarge(f"product of N has {size} points", {"size": size, "limit": max_size})
    oracle = FiniteSupports(sk)
    domain = []
    for x in itertools.product(*(range(n) for n in sk.N)):
        flags = support_kind(support(sk, x), oracle)
        if len(set(flags)) != 1:
            raise InvariantViolation("support families differ on a finite skeleton", {"x": x})
        if getattr(flags, tag):
            domain.append(tuple(x))
    return tuple(domain)


# Local domains and projection systems


@dataclass(frozen=True)
class LocalFamily:
    """A family of local domains: one set 𝐒_δ of sequences per skeleton element.

    Attributes:
        skeleton (Skeleton): The underlying ⟨Δ, N⟩.
        parts (Mapping[str, tuple[SeqOver, ...]]): 𝐒_δ sorted by values.
    """

    skeleton: Skeleton
    parts: Mapping[str, tuple[SeqOver, ...]]

    @classmethod
    def of(cls, sk: Skeleton, parts: Mapping[str, Iterable[SeqOver]]) -> "LocalFamily":
        return cls(sk, {d: tuple(sorted(set(parts.get(d, ())))) for d in sk.elements})

    def __len__(self) -> int:
        return sum(len(p) for p in self.parts.values())


@dataclass(frozen=True)
class ProjectionSystem:
    """Local domains with projection maps π_{δγ} for every δ ≤ γ.

    Attributes:
        skeleton (Skeleton): The underlying ⟨Δ, N⟩.
        family (Mapping[str, tuple[SeqOver, ...]]): 𝐒_δ sorted by values.
        pi (Mapping[tuple[str, str], Mapping[SeqOver, SeqOver]]): Table of π_{δγ} keyed (δ, γ).
    """

    skeleton: Skeleton
    family: Mapping[str, tuple[SeqOver, ...]]
    pi: Mapping[tuple[str, str], Mapping[SeqOver, SeqOver]]

    @classmethod
    def build(
        cls,
        sk: Skeleton,
        family: Mapping[str, Iterable[SeqOver]],
        overrides: Optional[Mapping[tuple[str, str], Mapping[SeqOver, SeqOver]]] = None,
    ) -> "ProjectionSystem":
        """Fill every π_{δγ} with restriction, then apply explicit rows from ``overrides``."""
        parts = {d: tuple(sorted(set(family.get(d, ())))) for d in sk.elements}
        pi: dict[tuple[str, str], dict[SeqOver, SeqOver]] = {}
        for d in sk.elements:
            shaped = [z for z in parts[d] if len(z.values) == len(sk.up_set(d))]
            for g in sk.up_set(d):
                table = {z: sk.restrict(z, g) for z in shaped}
                if overrides and (d, g) in overrides:
                    table.update(overrides[(d, g)])
                pi[(d, g)] = table
        return cls(sk, parts, pi)

    @classmethod
    def trivial(cls, family: LocalFamily) -> "ProjectionSystem":
        return cls.build(family.skeleton, family.parts)

    @cached_property
    def ground(self) -> GroundSet:
        return GroundSet(tuple(z for d in self.skeleton.elements for z in self.family[d]))

    @cached_property
    def block_of(self) -> dict[SeqOver, str]:
        return {z: d for d in self.skeleton.elements for z in self.family[d]}

    def project(self, z: SeqOver, gamma: str) -> SeqOver:
        return self.pi[(z.base, gamma)][z]

    def is_trivial(self) -> bool:
        sk = self.skeleton
        return all(
            image == sk.restrict(z, g)
            for (_, g), table in self.pi.items()
            for z, image in table.items()
        )

    def as_family(self) -> LocalFamily:
        return LocalFamily(self.skeleton, self.family)


@dataclass(frozen=True)
class SkeletonBundle:
    """A skeleton with one description of its domain.

    Exactly one of ``domain``, ``family`` and ``system`` may be set; when none
    is, the domain is S^A for the support tag ``supports``.
    """

    skeleton: Skeleton
    supports: str = "lf"
    domain: Optional[tuple[GlobalPoint, ...]] = None
    family: Optional[LocalFamily] = None
    system: Optional[ProjectionSystem] = None

    def __post_init__(self) -> None:
        given = [x for x in (self.domain, self.family, self.system) if x is not None]
        if len(given) > 1:
            raise ValueError("a bundle carries at most one of domain, family, system")
        if self.supports not in SUPPORT_TAGS:
            raise ValueError(f"support tag must be one of {', '.join(SUPPORT_TAGS)}")


WreathInput = Union[SkeletonBundle, LocalFamily, ProjectionSystem]


def locals_from_global(sk: Skeleton, S: Iterable[GlobalPoint]) -> LocalFamily:
    """𝐒_δ = {x|_δ : x ∈ S}."""
    points = list(S)
    return LocalFamily.of(sk, {d: [restrict_global(sk, x, d) for x in points] for d in sk.elements})


def as_system(bundle: WreathInput, max_size: int = DEFAULT_MAX_ORDER) -> ProjectionSystem:
    """Convert any bundle form to a projection system (restrictions where π is absent)."""
    if isinstance(bundle, ProjectionSystem):
        return bundle
    if isinstance(bundle, LocalFamily):
        return ProjectionSystem.trivial(bundle)
    if bundle.system is not None:
        return bundle.system
    if bundle.family is not None:
        return ProjectionSystem.trivial(bundle.family)
    domain = bundle.domain
    if domain is None:
        domain = domain_from_supports(bundle.skeleton, bundle.supports, max_size)
    return ProjectionSystem.trivial(locals_from_global(bundle.skeleton, domain))


def _check_sequences(sk: Skeleton, family: Mapping[str, Iterable[SeqOver]]) -> list[Violation]:
    violations = []
    for d in sk.elements:
        members = tuple(family.get(d, ()))
        if not members:
            violations.append(Violation(axiom="nonempty", where=[d], message=f"𝐒_{d} is empty"))
        ups = sk.up_set(d)
        for z in members:
            if z.base != d or len(z.values) != len(ups):
                violations.append(
                    Violation(
                        axiom="shape", where=[d, str(z)], message="sequence is not over the up-set"
                    )
                )
            elif any(not 0 <= v < sk.n(g) for g, v in zip(ups, z.values)):
                violations.append(
                    Violation(
                        axiom="range", where=[d, format_seq(sk, z)], message="value out of range"
                    )
                )
    return violations


def _check_perturbation(sk: Skeleton, family: Mapping[str, Iterable[SeqOver]]) -> list[Violation]:
    violations = []
    for d in sk.elements:
        members = set(family.get(d, ()))
        for z in sorted(members):
            for i in range(sk.n(d)):
                if sk.perturb(z, i) not in members:
                    violations.append(
                        Violation(
                            axiom="perturbation",
                            where=[d, format_seq(sk, z), str(i)],
                            message=f"z^{d}_{i} is missing from 𝐒_{d}",
                        )
                    )
                    break
    return violations


def validate_local_family(family: LocalFamily) -> ValidationReport:
    """Check nonemptiness, restriction images and perturbation closure."""
    sk = family.skeleton
    violations = _check_sequences(sk, family.parts)
    if violations:
        return ValidationReport.from_violations("family", violations)
    for d in sk.elements:
        for g in sk.up_set(d):
            if g == d:
                continue
            images = {sk.restrict(z, g) for z in family.parts[d]}
            target = set(family.parts[g])
            stray = sorted(images - target) + sorted(target - images)
            if stray:
                violations.append(
                    Violation(
                        axiom="restriction-image",
                        where=[d, g, format_seq(sk, stray[0])],
                        message=f"{{z|_{g} : z ∈ 𝐒_{d}}} differs from 𝐒_{g}",
                    )
                )
    violations.extend(_check_perturbation(sk, family.parts))
    return ValidationReport.from_violations("family", violations)


def validate_projection_system(ps: ProjectionSystem) -> ValidationReport:
    """Check every projection-system axiom, naming the offending tuple."""
    sk = ps.skeleton
    violations = _check_sequences(sk, ps.family)
    if violations:
        return ValidationReport.from_violations("system", violations)
    violations.extend(_check_perturbation(sk, ps.family))

    def fmt(z: SeqOver) -> str:
        return format_seq(sk, z)

    for d in sk.elements:
        for g in sk.up_set(d):
            table = ps.pi.get((d, g), {})
            target = set(ps.family[g])
            missing = [z for z in ps.family[d] if table.get(z) not in target]
            if missing:
                violations.append(
                    Violation(
                        axiom="codomain",
                        where=[d, g, fmt(missing[0])],
                        message=f"π_{d}{g} is undefined or leaves 𝐒_{g}",
                    )
                )
                continue
            if {table[z] for z in ps.family[d]} != target:
                violations.append(
                    Violation(
                        axiom="surjective", where=[d, g], message=f"π_{d}{g} is not onto 𝐒_{g}"
                    )
                )
            if g == d:
                moved = [z for z in ps.family[d] if table[z] != z]
                if moved:
                    violations.append(
                        Violation(
                            axiom="identity",
                            where=[d, fmt(moved[0])],
                            message=f"π_{d}{d} is not the identity",
                        )
                    )
                continue
            for z, w in itertools.combinations(ps.family[d], 2):
                if (table[z] == table[w]) != (sk.restrict(z, g) == sk.restrict(w, g)):
                    violations.append(
                        Violation(
                            axiom="congruence",
                            where=[d, g, fmt(z), fmt(w)],
                            message=f"π_{d}{g} does not identify the pairs agreeing on {g}",
                        )
                    )
                    break
    if violations:
        return ValidationReport.from_violations("system", violations)
    for d in sk.elements:
        for g in sk.up_set(d):
            for b in sk.up_set(g):
                for z in ps.family[d]:
                    if ps.project(ps.project(z, g), b) != ps.project(z, b):
                        violations.append(
                            Violation(
                                axiom="composition",
                                where=[d, g, b, fmt(z)],
                                message=f"π_{g}{b} ∘ π_{d}{g} differs from π_{d}{b}",
                            )
                        )
                        break
    return ValidationReport.from_violations("system", violations)


@dataclass(frozen=True)
class CanonicalPoset:
    """The union of local domains ordered by z ⪯ z' iff z' = π_{δγ}(z).

    Attributes:
        system (ProjectionSystem): Source of blocks and projections.
        upper (Mapping[SeqOver, tuple[SeqOver, ...]]): Elements above each z, its own block first.
    """

    system: ProjectionSystem
    upper: Mapping[SeqOver, tuple[SeqOver, ...]]

    @property
    def ground(self) -> GroundSet:
        return self.system.ground

    @property
    def blocks(self) -> Mapping[str, tuple[SeqOver, ...]]:
        return self.system.family

    def leq(self, z: SeqOver, w: SeqOver) -> bool:
        return w in self.upper[z]

    def maximal_elements(self) -> tuple[SeqOver, ...]:
        return tuple(z for z in self.ground if len(self.upper[z]) == 1)


def canonical_poset(ps: ProjectionSystem) -> CanonicalPoset:
    sk = ps.skeleton
    upper = {z: tuple(ps.project(z, g) for g in sk.up_set(z.base)) for z in ps.ground}
    return CanonicalPoset(ps, {z: tuple(dict.fromkeys([z, *ups])) for z, ups in upper.items()})


def _require_valid(ps: ProjectionSystem) -> None:
    report = validate_projection_system(ps)
    if not report.ok:
        first = report.violations[0]
        raise InvalidSystem(
            f"invalid projection system: {first.axiom} at {first.where}",
            {"violations": [v.model_dump() for v in report.violations]},
        )


def _coordinate_groups(sk: Skeleton, H: CoordinateGroups) -> dict[str, Optional[PermGroup]]:
    """Resolve H per element; None stands for the full symmetric group."""
    resolved: dict[str, Optional[PermGroup]] = {}
    for d in sk.elements:
        group = H.get(d) if H else None
        if group is not None:
            if group.ground != GroundSet(tuple(range(sk.n(d)))):
                raise DomainMismatch(f"H_{d} does not act on 0..{sk.n(d) - 1}", {"element": d})
            if not is_transitive(group):
                raise NotTransitive(f"H_{d} is not transitive on N_{d}", {"element": d})
        resolved[d] = group
    return resolved


def _coordinate_choices(n: int, group: Optional[PermGroup]) -> list[tuple[int, ...]]:
    if group is None:
        return list(itertools.permutations(range(n)))
    return [g.images for g in group.elements]


def _coordinate_map(ps: ProjectionSystem, g: Permutation, z: SeqOver) -> Optional[tuple[int, ...]]:
    """i ↦ g(z^δ_i)(δ), or None when it is not a permutation of N_δ."""
    sk = ps.skeleton
    d = z.base
    images = []
    for i in range(sk.n(d)):
        zi = sk.perturb(z, i)
        if zi not in ps.ground:
            return None
        image = g(zi)
        if image.base != d:
            return None
        images.append(sk.value(image, d))
    if sorted(images) != list(range(sk.n(d))):
        return None
    return tuple(images)


def _satisfies_projective(
    ps: ProjectionSystem, groups: Mapping[str, Optional[PermGroup]], g: Permutation
) -> bool:
    """Block preservation, commuting with every π and coordinate maps in H_δ, for one g."""
    sk = ps.skeleton
    for z in ps.ground:
        image = g(z)
        if image.base != z.base:
            return False
        for gamma in sk.up_set(z.base):
            if g(ps.project(z, gamma)) != ps.project(image, gamma):
                return False
        sigma = _coordinate_map(ps, g, z)
        if sigma is None:
            return False
        group = groups[z.base]
        if group is not None and Permutation(group.ground, sigma) not in group:
            return False
    return True


def wreath_group(
    bundle: WreathInput, H: CoordinateGroups = None, max_order: int = DEFAULT_MAX_ORDER
) -> PermGroup:
    """Wr^{𝐒,π} H_δ as a permutation group of the canonical poset ground.

    Blocks are processed top-down. Within a block the elements sharing their
    projections to every strictly larger element form a fibre indexed by the
    bottom coordinate; an automorphism sends each fibre onto the fibre over
    the images already chosen, through some σ ∈ H_δ.

    Args:
        bundle (WreathInput): Global domain, local family or projection system.
        H (CoordinateGroups): Transitive groups over 0..N_δ-1; missing entries mean Sym(N_δ).
        max_order (int): Guard on the number of group elements.

    Returns:
        PermGroup: The product, over ``as_system(bundle).ground``.

    Raises:
        InvalidSystem: If the projection system fails validation.
        NotTransitive: If some H_δ is not transitive.
        OrderGuardExceeded: If the group has more than ``max_order`` elements.
    """
    ps = as_system(bundle, max_order)
    _require_valid(ps)
    sk = ps.skeleton
    groups = _coordinate_groups(sk, H)
    poset = canonical_poset(ps)

    slots: list[tuple[str, tuple[SeqOver, ...], tuple[SeqOver, ...]]] = []
    fibres: dict[str, dict[tuple[SeqOver, ...], tuple[SeqOver, ...]]] = {}
    for d in sk.top_down():
        by_signature: dict[tuple[SeqOver, ...], dict[int, SeqOver]] = {}
        for z in ps.family[d]:
            by_signature.setdefault(poset.upper[z][1:], {})[sk.value(z, d)] = z
        fibres[d] = {}
        for sig, members in by_signature.items():
            if len(members) != sk.n(d):
                raise InvariantViolation(f"fibre over {d} does not cover N_{d}", {"element": d})
            fibre = tuple(members[i] for i in range(sk.n(d)))
            fibres[d][sig] = fibre
            slots.append((d, sig, fibre))
    choices = {d: _coordinate_choices(sk.n(d), groups[d]) for d in sk.elements}
    logger.debug(f"wreath search over {len(ps.ground)} points in {len(slots)} fibres")

    ground = ps.ground
    found: list[Permutation] = []
    assignment: dict[SeqOver, SeqOver] = {}

    def extend(k: int) -> None:
        if k == len(slots):
            found.append(Permutation(ground, tuple(ground.index[assignment[z]] for z in ground)))
            if len(found) > max_order:
                raise OrderGuardExceeded(
                    f"wreath product exceeds max_order={max_order}", {"max_order": max_order}
                )
            return
        d, sig, fibre = slots[k]
        target = fibres[d].get(tuple(assignment[s] for s in sig))
        if target is None:
            return
        for sigma in choices[d]:
            for i, z in enumerate(fibre):
                assignment[z] = target[sigma[i]]
            extend(k + 1)
        for z in fibre:
            del assignment[z]

    extend(0)
    for g in found:
        if not _satisfies_projective(ps, groups, g):
            raise InvariantViolation("wreath search produced a non-member")
    logger.debug(f"wreath product has order {len(found)}")
    return group_from_elements(ground, found)


def brute_wreath_oracle(
    bundle: WreathInput, H: CoordinateGroups = None, limit: int = BRUTE_FORCE_LIMIT
) -> PermGroup:
    """Filter all of Sym(𝐒) through the projective conditions literally.

    Raises:
        TooLarge: If |𝐒| exceeds ``limit``.
    """
    ps = as_system(bundle)
    groups = _coordinate_groups(ps.skeleton, H)
    return brute_filter(ps.ground, lambda g: _satisfies_projective(ps, groups, g), limit)


# Global domains


def _perturb_global(
    sk: Skeleton,
    points: frozenset[GlobalPoint],
    ordered: tuple[GlobalPoint, ...],
    x: GlobalPoint,
    delta: str,
    i: int,
) -> Optional[GlobalPoint]:
    """x^δ_i in S, falling back to any y with y|_δ = (x|_δ)^δ_i."""
    candidate = list(x)
    candidate[sk.index[delta]] = i
    if tuple(candidate) in points:
        return tuple(candidate)
    wanted = sk.perturb(restrict_global(sk, x, delta), i)
    return next((y for y in ordered if restrict_global(sk, y, delta) == wanted), None)


def _satisfies_classical(
    sk: Skeleton,
    ground: GroundSet,
    groups: Mapping[str, Optional[PermGroup]],
    g: Permutation,
) -> bool:
    """Restriction congruences kept in both directions and coordinate maps in H_δ."""
    ordered: tuple[GlobalPoint, ...] = ground.elements
    points = frozenset(ordered)
    for d in sk.elements:
        restricted = [restrict_global(sk, x, d) for x in ordered]
        moved = [restrict_global(sk, g(x), d) for x in ordered]
        for a, b in itertools.combinations(range(len(ordered)), 2):
            if (restricted[a] == restricted[b]) != (moved[a] == moved[b]):
                return False
        for x in ordered:
            sigma = []
            for i in range(sk.n(d)):
                y = _perturb_global(sk, points, ordered, x, d, i)
                if y is None:
                    return False
                sigma.append(g(y)[sk.index[d]])
            if sorted(sigma) != list(range(sk.n(d))):
                return False
            group = groups[d]
            if group is not None and Permutation(group.ground, tuple(sigma)) not in group:
                return False
    return True


def global_wreath_group(
    sk: Skeleton,
    S: Iterable[GlobalPoint],
    H: CoordinateGroups = None,
    max_order: int = DEFAULT_MAX_ORDER,
) -> PermGroup:
    """Wr^S H_δ on a global domain, lifted from the local family of S.

    Each local element acts on x through its restrictions:
    g(x)(δ) = g(x|_δ)(δ). The lift is re-checked against both conditions.

    Raises:
        InvariantViolation: If a lifted element leaves S or fails a condition.
    """
    ground = GroundSet(tuple(sorted(set(S))))
    groups = _coordinate_groups(sk, H)
    family = locals_from_global(sk, ground.elements)
    ps = ProjectionSystem.trivial(family)
    local = wreath_group(ps, H, max_order)
    lifted = []
    for g in local.elements:
        images = []
        for x in ground.elements:
            y = tuple(
                sk.value(g(restrict_global(sk, x, d)), d)
                for d in sk.elements
            )
            if y not in ground:
                raise InvariantViolation("lifted element leaves the domain", {"x": x, "y": y})
            images.append(ground.index[y])
        try:
            lifted.append(Permutation(ground, tuple(images)))
        except ValueError as e:
            raise InvariantViolation("lifted element is not a bijection of S") from e
    for g in lifted:
        if not _satisfies_classical(sk, ground, groups, g):
            raise InvariantViolation("lifted element breaks a congruence")
    return group_from_elements(ground, lifted)


def brute_global_wreath(
    sk: Skeleton,
    S: Iterable[GlobalPoint],
    H: CoordinateGroups = None,
    limit: int = BRUTE_FORCE_LIMIT,
) -> PermGroup:
    """Filter all of Sym(S) through the congruence and coordinate conditions.

    Raises:
        TooLarge: If |S| exceeds ``limit``.
    """
    ground = GroundSet(tuple(sorted(set(S))))
    groups = _coordinate_groups(sk, H)
    return brute_filter(ground, lambda g: _satisfies_classical(sk, ground, groups, g), limit)


def _coherent_families(ps: ProjectionSystem, limit: int) -> Iterator[dict[str, SeqOver]]:
    """Families (z_δ) with π_{δγ}(z_δ) = z_γ, chosen top-down."""
    sk = ps.skeleton
    order = sk.top_down()
    chosen: dict[str, SeqOver] = {}
    count = 0

    def extend(k: int) -> Iterator[dict[str, SeqOver]]:
        nonlocal count
        if k == len(order):
            count += 1
            if count > limit:
                raise TooLarge(f"more than {limit} coherent families", {"limit": limit})
            yield dict(chosen)
            return
        d = order[k]
        above = [g for g in sk.up_set(d) if g != d]
        for z in ps.family[d]:
            if all(ps.project(z, g) == chosen[g] for g in above):
                chosen[d] = z
                yield from extend(k + 1)
        chosen.pop(d, None)

    yield from extend(0)


def _first_non_extendable(ps: ProjectionSystem, limit: int) -> Optional[tuple[str, SeqOver]]:
    covered = set()
    for fam in _coherent_families(ps, limit):
        covered.update(fam.values())
    for d in ps.skeleton.elements:
        for z in ps.family[d]:
            if z not in covered:
                return d, z
    return None


def is_full(bundle: WreathInput, limit: int = DEFAULT_MAX_ORDER) -> bool:
    """Whether every z ∈ 𝐒_δ extends to a coherent family."""
    return _first_non_extendable(as_system(bundle, limit), limit) is None


def global_from_full(
    family: LocalFamily, limit: int = DEFAULT_MAX_ORDER
) -> tuple[GlobalPoint, ...]:
    """The closed domain {x : ∀γ x|_γ ∈ 𝐒_γ} of a full family.

    Raises:
        NotFull: If some z ∈ 𝐒_δ extends to no global x; the pair (δ, z) is reported.
        InvariantViolation: If the round trip back to local domains changes the family.
    """
    ps = ProjectionSystem.trivial(family)
    sk = family.skeleton
    witness = _first_non_extendable(ps, limit)
    if witness is not None:
        d, z = witness
        raise NotFull(
            f"{format_seq(sk, z)} in 𝐒_{d} extends to no global sequence",
            {"element": d, "sequence": list(z.values)},
        )
    domain = sorted(
        {
            tuple(fam[d].values[sk.position(d, d)] for d in sk.elements)
            for fam in _coherent_families(ps, limit)
        }
    )
    if locals_from_global(sk, domain).parts != LocalFamily.of(sk, family.parts).parts:
        raise InvariantViolation("local domains of the closed domain differ from the family")
    return tuple(domain)


# ρ rewriting


def rho(ps: ProjectionSystem) -> tuple[LocalFamily, dict[SeqOver, SeqOver]]:
    """Rewrite a projection system as a plain family via ρ(z)(γ) = π_{δγ}(z)(γ).

    Returns:
        tuple[LocalFamily, dict[SeqOver, SeqOver]]: 𝐒' = ρ(𝐒) and the map ρ.

    Raises:
        InvalidSystem: If the system fails validation.
        InvariantViolation: If ρ breaks one of its defining correspondences.
    """
    _require_valid(ps)
    sk = ps.skeleton
    mapping = {
        z: SeqOver(z.base, tuple(sk.value(ps.project(z, g), g) for g in sk.up_set(z.base)))
        for z in ps.ground
    }
    oracle = FiniteSupports(sk)
    for d in sk.elements:
        members = ps.family[d]
        for z in members:
            if sk.value(mapping[z], d) != sk.value(z, d):
                raise InvariantViolation("ρ(z)(δ) differs from z(δ)", {"z": str(z)})
            supp = {g for g, v in zip(sk.up_set(d), mapping[z].values) if v}
            if not support_kind(supp, oracle).max:
                raise InvariantViolation("ρ(z) has a support outside Max", {"z": str(z)})
        for g in sk.up_set(d):
            for z, w in itertools.product(members, repeat=2):
                same = sk.restrict(z, g) == sk.restrict(w, g)
                if same != (sk.restrict(mapping[z], g) == sk.restrict(mapping[w], g)):
                    raise InvariantViolation(
                        "ρ does not respect restriction to γ", {"pair": [str(z), str(w)]}
                    )
            for z in members:
                for w in ps.family[g]:
                    if (ps.project(z, g) == w) != (sk.restrict(mapping[z], g) == mapping[w]):
                        raise InvariantViolation("ρ does not intertwine π with restriction")
    rewritten = LocalFamily.of(sk, {d: (mapping[z] for z in ps.family[d]) for d in sk.elements})
    if any(len(rewritten.parts[d]) != len(ps.family[d]) for d in sk.elements):
        raise InvariantViolation("ρ is not injective on a block")
    report = validate_local_family(rewritten)
    if not report.ok:
        raise InvariantViolation(
            "ρ(𝐒) is not a family of local domains", {"report": report.model_dump()}
        )
    return rewritten, mapping


def verify_rho(
    ps: ProjectionSystem, H: CoordinateGroups = None, max_order: int = DEFAULT_MAX_ORDER
) -> IsoWitness:
    """Witness that g ↦ ρ∘g∘ρ⁻¹ maps Wr^{𝐒,π} onto Wr^{ρ(𝐒)}, each computed on its own."""
    rewritten, mapping = rho(ps)
    source = wreath_group(ps, H, max_order)
    target = wreath_group(rewritten, H, max_order)
    return verify_conjugation(source, target, mapping)


# Homogeneity and finite character


def _is_convex(sk: Skeleton, piece: frozenset[str], within: Iterable[str]) -> bool:
    return all(
        c in piece
        for a in piece
        for b in piece
        for c in within
        if sk.leq(a, c) and sk.leq(c, b)
    )


def _internally_trivial(ps: ProjectionSystem, piece: Iterable[str]) -> bool:
    sk = ps.skeleton
    members = list(piece)
    return all(
        ps.project(z, b) == sk.restrict(z, b)
        for g in members
        for b in members
        if sk.leq(g, b)
        for z in ps.family[g]
    )


def finite_character_partition(ps: ProjectionSystem) -> dict[str, tuple[tuple[str, ...], ...]]:
    """Coarsest partition of each up-set into convex pieces with trivial internal projections.

    Pieces are listed top-down by their largest element.

    Raises:
        UpSetTooLarge: If an up-set has more than ``UP_SET_LIMIT`` elements.
    """
    sk = ps.skeleton
    rank = {d: i for i, d in enumerate(sk.top_down())}
    result: dict[str, tuple[tuple[str, ...], ...]] = {}
    for d in sk.elements:
        ups = sk.up_set(d)
        if len(ups) > UP_SET_LIMIT:
            raise UpSetTooLarge(
                f"up-set of {d} has {len(ups)} elements", {"element": d, "limit": UP_SET_LIMIT}
            )
        best = _search_partition(ps, ups)
        ordered = sorted(best, key=lambda piece: min(rank[g] for g in piece))
        result[d] = tuple(tuple(g for g in ups if g in piece) for piece in ordered)
    return result


def _search_partition(ps: ProjectionSystem, ups: tuple[str, ...]) -> list[frozenset[str]]:
    sk = ps.skeleton
    for count in range(1, len(ups) + 1):
        pieces: list[set[str]] = []

        def place(k: int) -> Optional[list[frozenset[str]]]:
            if k == len(ups):
                frozen = [frozenset(p) for p in pieces]
                if len(frozen) == count and all(_is_convex(sk, p, ups) for p in frozen):
                    return frozen
                return None
            g = ups[k]
            for piece in pieces:
                piece.add(g)
                if _internally_trivial(ps, piece):
                    found = place(k + 1)
                    if found is not None:
                        return found
                piece.discard(g)
            if len(pieces) < count:
                pieces.append({g})
                found = place(k + 1)
                if found is not None:
                    return found
                pieces.pop()
            return None

        found = place(0)
        if found is not None:
            return found
    raise InvariantViolation("singleton pieces always witness finite character")


def has_finite_character(ps: ProjectionSystem) -> bool:
    return all(finite_character_partition(ps).values())


def is_character_partition(
    ps: ProjectionSystem, delta: str, pieces: Iterable[Iterable[str]]
) -> bool:
    """Whether ``pieces`` split the up-set of δ into convex pieces with trivial internal π."""
    sk = ps.skeleton
    ups = sk.up_set(delta)
    frozen = [frozenset(p) for p in pieces]
    flat = [g for p in frozen for g in p]
    if len(flat) != len(set(flat)) or set(flat) != set(ups) or not all(frozen):
        return False
    return all(_is_convex(sk, p, ups) and _internally_trivial(ps, p) for p in frozen)


def is_locally_homogeneous(bundle: WreathInput, max_order: int = DEFAULT_MAX_ORDER) -> bool:
    """Whether Wr^{𝐒,π} Sym(N_δ) is transitive on every block 𝐒_δ."""
    ps = as_system(bundle, max_order)
    group = wreath_group(ps, None, max_order)
    return all(is_transitive(group, ps.family[d]) for d in ps.skeleton.elements)


def is_approximately_homogeneous(
    sk: Skeleton, S: Iterable[GlobalPoint], max_order: int = DEFAULT_MAX_ORDER
) -> bool:
    """For all x, y ∈ S and δ some g ∈ Wr^S Sym(N_δ) has g(x)|_δ = y|_δ."""
    group = global_wreath_group(sk, S, None, max_order)
    points: tuple[GlobalPoint, ...] = group.ground.elements
    for d in sk.elements:
        everything = {restrict_global(sk, x, d) for x in points}
        for orbit in orbits(group):
            if {restrict_global(sk, x, d) for x in orbit} != everything:
                return False
    return True


# Paddings and skeleton diagnostics


@dataclass(frozen=True)
class Padded:
    """A padded projection system with the embedding of the old ground.

    Attributes:
        system (ProjectionSystem): The padded system.
        embedding (Mapping[SeqOver, SeqOver]): Old sequence to its padded copy.
        witness (IsoWitness): Old product against the padded one through ``embedding``.
    """

    system: ProjectionSystem
    embedding: Mapping[SeqOver, SeqOver]
    witness: IsoWitness


def _fresh(sk: Skeleton, names: Iterable[str]) -> list[str]:
    fresh = list(names)
    clash = set(fresh) & set(sk.elements)
    if clash:
        raise SchemaError(f"padding names already in use: {sorted(clash)}")
    return fresh


def pad_top(bundle: WreathInput, k: int, max_order: int = DEFAULT_MAX_ORDER) -> Padded:
    """Add k fresh N=1 levels above the top, extending π by the constant maps.

    Raises:
        MissingLevels: If the skeleton has no level map.
        DepthTooSmall: If k is negative.
    """
    ps = as_system(bundle, max_order)
    sk = ps.skeleton
    if sk.levels is None:
        raise MissingLevels("pad_top needs a level map on the skeleton")
    if k < 0:
        raise DepthTooSmall("padding depth cannot be negative", {"k": k})
    top = max(sk.levels)
    new = _fresh(sk, (f"top~{j}" for j in range(1, k + 1)))
    pairs = [p for p in sk.le if p[0] != p[1]]
    pairs += [(d, t) for d in sk.elements for t in new]
    pairs += [(new[i], new[j]) for i in range(k) for j in range(i + 1, k)]
    N = {**dict(zip(sk.elements, sk.N)), **{t: 1 for t in new}}
    levels = {d: sk.level(d) for d in sk.elements}
    levels.update({t: top + j + 1 for j, t in enumerate(new)})
    padded = Skeleton.build((*sk.elements, *new), pairs, N, levels)

    def iota(z: SeqOver) -> SeqOver:
        return SeqOver(
            z.base,
            tuple(sk.value(z, g) if g in sk.index else 0 for g in padded.up_set(z.base)),
        )

    embedding = {z: iota(z) for z in ps.ground}
    family = {d: [embedding[z] for z in ps.family[d]] for d in sk.elements}
    for t in new:
        family[t] = [SeqOver(t, tuple(0 for _ in padded.up_set(t)))]
    overrides = {
        (d, g): {embedding[z]: embedding[ps.project(z, g)] for z in ps.family[d]}
        for d in sk.elements
        for g in sk.up_set(d)
    }
    system = ProjectionSystem.build(padded, family, overrides)
    witness = verify_induced_conjugation(
        wreath_group(ps, None, max_order), wreath_group(system, None, max_order), embedding
    )
    return Padded(system, embedding, witness)


def pad_bottom(bundle: WreathInput, k: int, max_order: int = DEFAULT_MAX_ORDER) -> Padded:
    """Hang a chain of k fresh N=1 levels below every min-level element.

    Raises:
        MissingLevels: If the skeleton has no level map.
        DepthTooSmall: If k is negative.
    """
    ps = as_system(bundle, max_order)
    sk = ps.skeleton
    if sk.levels is None:
        raise MissingLevels("pad_bottom needs a level map on the skeleton")
    if k < 0:
        raise DepthTooSmall("padding depth cannot be negative", {"k": k})
    low = min(sk.levels)
    bottoms = [d for d in sk.elements if sk.level(d) == low]
    chains = {d: _fresh(sk, (f"{d}~{n}" for n in range(1, k + 1))) for d in bottoms}
    new = [t for d in bottoms for t in chains[d]]
    pairs = [p for p in sk.le if p[0] != p[1]]
    for d, chain in chains.items():
        for n, t in enumerate(chain):
            pairs += [(t, g) for g in sk.up_set(d)]
            pairs += [(t, chain[m]) for m in range(n)]
    N = {**dict(zip(sk.elements, sk.N)), **{t: 1 for t in new}}
    levels = {d: sk.level(d) for d in sk.elements}
    for chain in chains.values():
        levels.update({t: low - n - 1 for n, t in enumerate(chain)})
    padded = Skeleton.build((*sk.elements, *new), pairs, N, levels)

    family: dict[str, list[SeqOver]] = {d: list(ps.family[d]) for d in sk.elements}
    overrides: dict[tuple[str, str], dict[SeqOver, SeqOver]] = {}
    for d, chain in chains.items():
        for t in chain:
            lifted = [
                SeqOver(t, tuple(sk.value(z, g) if g in sk.index else 0 for g in padded.up_set(t)))
                for z in ps.family[d]
            ]
            family[t] = lifted
            for g in sk.up_set(d):
                overrides[(t, g)] = {w: ps.project(padded.restrict(w, d), g) for w in lifted}
    system = ProjectionSystem.build(padded, family, overrides)
    embedding = {z: z for z in ps.ground}
    witness = verify_induced_conjugation(
        wreath_group(ps, None, max_order), wreath_group(system, None, max_order), embedding
    )
    return Padded(system, embedding, witness)


def d_delta(sk: Skeleton, x: GlobalPoint, y: GlobalPoint, enumeration: Iterable[str]) -> Fraction:
    """2^-m for the least index m (from 0) where x|_δm and y|_δm differ; 0 if none does."""
    for m, d in enumerate(enumeration):
        if restrict_global(sk, x, d) != restrict_global(sk, y, d):
            return Fraction(1, 2**m)
    return Fraction(0)


def is_rigid_skeleton(sk: Skeleton, limit: int = BRUTE_FORCE_LIMIT) -> bool:
    """Whether the identity is the only level- and N-preserving order automorphism of Δ.

    Raises:
        TooLarge: If Δ has more than ``limit`` elements.
    """
    ground = GroundSet(sk.elements)

    def keep(g: Permutation) -> bool:
        image = {a: str(g(a)) for a in sk.elements}
        for a, b in image.items():
            if sk.n(b) != sk.n(a) or (sk.levels is not None and sk.level(b) != sk.level(a)):
                return False
        return all(
            sk.leq(a, b) == sk.leq(image[a], image[b]) for a in sk.elements for b in sk.elements
        )

    return brute_filter(ground, keep, limit).order == 1


# Trees from wreath products


@dataclass(frozen=True)
class WreathTree:
    """The truncated tree T_P of a projection system.

    Attributes:
        tree (LTree): T_P with levels 0..R (integer labels).
        node_of (Mapping[SeqOver, str]): z ↦ t_z, the copy at depth #z.
        witness (IsoWitness): Aut*(P) against Aut(T_P) through ``node_of``.
    """

    tree: LTree
    node_of: Mapping[SeqOver, str]
    witness: IsoWitness


def _copy_id(sk: Skeleton, n: int, z: SeqOver) -> str:
    return f"{n}|{format_seq(sk, z)}"


def _side_id(sk: Skeleton, n: int, z: SeqOver) -> str:
    return f"{format_seq(sk, z)}_{n}"


def tree_from_wreath(
    ps: ProjectionSystem,
    k: int,
    lambda_p: Optional[Mapping[SeqOver, Fraction]] = None,
    max_order: int = DEFAULT_MAX_ORDER,
) -> WreathTree:
    """Build the k-truncated T_P and verify Aut(T_P) ≅ Aut*(P).

    Each z gets copies (n, z) for n = 0..k stacked inside its L-level block,
    with (0, z) hanging below (k, parent of z). A side chain z_n for
    #z ≤ n ≤ k-1 hangs below (#z - 1, z). An apex joins several maximal
    elements.

    Args:
        ps (ProjectionSystem): A valid system over a treeable skeleton.
        k (int): Copies per block minus one; at least |Δ| + 1.
        lambda_p (Optional[Mapping[SeqOver, Fraction]]): Level of each z; defaults to λ_Δ(δ).
        max_order (int): Guard for both group computations.

    Returns:
        WreathTree: The tree, the node map and the verified (or failed) witness.

    Raises:
        DepthTooSmall: If k < |Δ| + 1.
        MissingLevels: If neither ``lambda_p`` nor skeleton levels are available.
        NotTreeable: If λ_P is not constant on a block or Δ with its levels is not an L-tree.
    """
    _require_valid(ps)
    sk = ps.skeleton
    if k < len(sk) + 1:
        raise DepthTooSmall(f"depth {k} is below |Δ| + 1 = {len(sk) + 1}", {"k": k})
    if lambda_p is not None:
        levels: dict[str, Fraction] = {}
        for z, lv in lambda_p.items():
            if levels.setdefault(z.base, Fraction(lv)) != Fraction(lv):
                raise NotTreeable(f"λ_P is not constant on 𝐒_{z.base}", {"block": z.base})
        sk = Skeleton(sk.elements, sk.le, sk.N, tuple(levels[d] for d in sk.elements))
    elif sk.levels is None:
        raise MissingLevels("tree_from_wreath needs levels for the skeleton")
    delta_report = validate_skeleton(sk)
    if not delta_report.ok:
        raise NotTreeable(
            "skeleton with its levels is not an L-tree", {"report": delta_report.model_dump()}
        )
    delta_tree = skeleton_as_tree(sk)

    tag = {d: i + 1 for i, d in enumerate(sk.elements)}
    block_level = {d: delta_tree.level[delta_tree.pos(d)] for d in sk.elements}
    tops = [d for d in sk.elements if delta_tree.parent[delta_tree.pos(d)] is None]
    poset_tops = [z for d in tops for z in ps.family[d]]
    apex = "apex" if len(poset_tops) > 1 else None

    def rank(d: str, n: int) -> int:
        return block_level[d] * (k + 1) + (k - n)

    entries: list[tuple[str, int, Optional[str]]] = []
    for z in ps.ground:
        d = z.base
        parent_pos = delta_tree.parent[delta_tree.pos(d)]
        if parent_pos is None:
            above = apex
        else:
            above = _copy_id(sk, k, ps.project(z, delta_tree.ids[parent_pos]))
        for n in range(k + 1):
            parent = above if n == 0 else _copy_id(sk, n - 1, z)
            entries.append((_copy_id(sk, n, z), rank(d, n), parent))
        for n in range(tag[d], k):
            parent = _copy_id(sk, n - 1, z) if n == tag[d] else _side_id(sk, n - 1, z)
            entries.append((_side_id(sk, n, z), rank(d, n), parent))
    height = len(delta_tree.order) * (k + 1)
    if apex is not None:
        entries.append((apex, height, None))
        height += 1
    tree = LTree.build(LinearOrder(tuple(Fraction(r) for r in range(height))), entries)
    report = validate_ltree(tree)
    if not report.ok:
        raise InvariantViolation("T_P is not an L-tree", {"report": report.model_dump()})

    node_of = {z: _copy_id(sk, tag[z.base], z) for z in ps.ground}
    source = wreath_group(ps, None, max_order)
    target = aut_group(tree, max_order)
    witness = verify_induced_conjugation(source, target, node_of)
    if not witness.verified:
        logger.warning(f"truncated tree at depth {k} does not reproduce Aut*(P): {witness.reason}")
    logger.debug(f"T_P has {len(tree)} nodes; orders {source.order} and {target.order}")
    return WreathTree(tree, node_of, witness)
