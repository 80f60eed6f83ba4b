"""End-to-end verifiers tying spaces, trees and wreath products together.

Every pipeline builds the intermediate objects explicitly and discharges each
claimed isomorphism with a conjugation check, collecting the results in a
``TheoremReport``. Guards (``OrderGuardExceeded``, ``TooLarge``) propagate;
a broken post-condition becomes a FAIL verdict with a diagnostic line.
"""

import hashlib
import itertools
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Hashable, Iterator, Mapping, Optional, Sequence, Union

from .errors import (
    BlockMismatch,
    ClassMismatch,
    InvalidSystem,
    InvariantViolation,
    MissingLevels,
    NotLinear,
    NotOrderIso,
    NotProper,
    NotUpwardClosed,
)
from .functors import (
    BallTree,
    LevelEmbedding,
    canonical_levels,
    functor_f,
    functor_g,
    pad_chain,
    verify_f_iso,
    verify_pad_chain,
)
from .ltree import (
    CondensedTree,
    LTree,
    C_set,
    aut_group,
    condense,
    is_homogeneous_tree,
    is_pruned,
    is_special,
    label_N,
    property_star,
    spl,
    validate_skeleton,
)
from .models import TheoremReport, UrysohnReport, WitnessRecord
from .permgroup import (
    DEFAULT_MAX_ORDER,
    IsoWitness,
    PermGroup,
    stabilizer,
    verify_conjugation,
    verify_induced_conjugation,
)
from .skeleton import SeqOver, Skeleton, format_seq, seq_from_map
from .ultrametric import (
    UltraSpace,
    format_rational,
    is_exact,
    is_homogeneous,
    iso_group,
    wideness_profile,
)
from .wreath import (
    ProjectionSystem,
    WreathInput,
    as_system,
    canonical_poset,
    domain_from_supports,
    global_wreath_group,
    is_character_partition,
    is_locally_homogeneous,
    pad_bottom,
    pad_top,
    tree_from_wreath,
    validate_projection_system,
    wreath_group,
)

logger = logging.getLogger(__name__)

# Post-condition failures that turn into a FAIL verdict instead of an exception.
_REPORTED_ERRORS = (InvariantViolation, InvalidSystem, NotOrderIso, BlockMismatch)


# Labeling


@dataclass(frozen=True)
class LabelingResult:
    """Output of ``labeling``.

    Attributes:
        labels (Mapping[str, SeqOver]): t ↦ z_t on the labeled region.
        target (Mapping[str, tuple[SeqOver, ...]]): Labels grouped by class.
        enumeration (tuple[str, ...]): The nodes t_i of class δ̄, in the order used.
        lambda_values (Mapping[str, int]): t ↦ Λ(t).
        skeleton (Skeleton): ⟨Δ(T), N^T⟩, whose element names are the class names.
    """

    labels: Mapping[str, SeqOver]
    target: Mapping[str, tuple[SeqOver, ...]]
    enumeration: tuple[str, ...]
    lambda_values: Mapping[str, int]
    skeleton: Skeleton


def _chain_minimum(T: LTree, C: Sequence[str]) -> str:
    lowest = min(C, key=lambda t: T.level[T.pos(t)])
    if set(C) != set(T.up_set(lowest)):
        raise NotUpwardClosed(
            "chain is not the up-set of its minimum", {"chain": sorted(C), "minimum": lowest}
        )
    return lowest


def labeling(
    T: LTree,
    C: Sequence[str],
    delta_bar: str,
    z_bar: Optional[SeqOver] = None,
    condensed: Optional[CondensedTree] = None,
) -> LabelingResult:
    """Label every node below C whose class lies above δ̄ by a sequence extending z̄.

    With t_i the nodes of class δ̄ in canonical order and i_t the least i with
    t_i ≤ t, each node gets Λ(t) = |{t' ∈ C_t : i_t' < i_t}| and
    z_t(γ) = Λ(t|_λ(γ)) off [C], z_t(γ) = z̄(γ) on [C].

    Args:
        T (LTree): A finite pruned tree.
        C (Sequence[str]): An upward closed chain, possibly empty.
        delta_bar (str): A class name with δ̄ < [C].
        z_bar (Optional[SeqOver]): Sequence over the class of min C; None when C is empty.
        condensed (Optional[CondensedTree]): Reuse a condensation of T.

    Returns:
        LabelingResult: The labels with the enumeration and Λ values used.

    Raises:
        NotUpwardClosed: If C is not the up-set of its minimum.
        NotProper: If nothing lies strictly below C.
        ClassMismatch: If δ̄ is not a class below [C] or z̄ does not live over [C].
        InvariantViolation: If the result is not an order-preserving bijection.
    """
    cond = condensed if condensed is not None else condense(T)
    sk = label_N(T, cond)
    Q = cond.tree
    if delta_bar not in cond.members:
        raise ClassMismatch(f"{delta_bar} is not a class of the tree", {"class": delta_bar})

    fixed: tuple[str, ...] = ()
    if C:
        lowest = _chain_minimum(T, C)
        if not T.children(lowest):
            raise NotProper(f"no node lies below the chain ending at {lowest}")
        top_class = cond.class_of[lowest]
        if not sk.lt(delta_bar, top_class):
            raise ClassMismatch(
                f"{delta_bar} is not below {top_class}", {"class": delta_bar, "chain": top_class}
            )
        if z_bar is None or z_bar.base != top_class:
            raise ClassMismatch(f"z̄ must be a sequence over {top_class}")
        try:
            seq_from_map(sk, top_class, dict(zip(sk.up_set(top_class), z_bar.values)))
        except ValueError as e:
            raise ClassMismatch(f"z̄ is not a sequence over {top_class}: {e}") from e
        fixed = sk.up_set(top_class)
        region = [
            t
            for t in T.ids
            if t != lowest and T.leq(t, lowest) and sk.leq(delta_bar, cond.class_of[t])
        ]
    else:
        if z_bar is not None:
            raise ClassMismatch("z̄ must be omitted for the empty chain")
        region = [t for t in T.ids if sk.leq(delta_bar, cond.class_of[t])]

    enumeration = tuple(t for t in region if cond.class_of[t] == delta_bar)
    if not enumeration:
        raise NotProper(f"no node of class {delta_bar} below the chain")
    first: dict[str, int] = {}
    for t in region:
        below = [i for i, s in enumerate(enumeration) if T.leq(s, t)]
        if not below:
            raise InvariantViolation(f"{t} has no node of class {delta_bar} below it")
        first[t] = below[0]

    lam: dict[str, int] = {}
    for t in region:
        siblings = C_set(T, t, cond.group, cond.members[cond.class_of[t]])
        lam[t] = sum(1 for s in siblings if first[s] < first[t])

    labels: dict[str, SeqOver] = {}
    for t in region:
        cls = cond.class_of[t]
        values = {}
        for gamma in sk.up_set(cls):
            if gamma in fixed:
                values[gamma] = sk.value(z_bar, gamma)
            else:
                values[gamma] = lam[T.up(t, Q.level[Q.pos(gamma)])]
        labels[t] = seq_from_map(sk, cls, values)

    _check_labeling(T, sk, cond, labels, delta_bar, fixed, z_bar)
    target: dict[str, list[SeqOver]] = {}
    for z in labels.values():
        target.setdefault(z.base, []).append(z)
    logger.debug(f"labeled {len(labels)} nodes from {len(enumeration)} nodes of {delta_bar}")
    return LabelingResult(
        labels,
        {d: tuple(sorted(zs)) for d, zs in target.items()},
        enumeration,
        lam,
        sk,
    )


def _check_labeling(
    T: LTree,
    sk: Skeleton,
    cond: CondensedTree,
    labels: Mapping[str, SeqOver],
    delta_bar: str,
    fixed: Sequence[str],
    z_bar: Optional[SeqOver],
) -> None:
    """Bijectivity onto the extensions of z̄, class membership and order equivalence."""
    expected = 0
    for gamma in sk.elements:
        if sk.leq(delta_bar, gamma) and gamma not in fixed:
            size = 1
            for g in sk.up_set(gamma):
                if g not in fixed:
                    size *= sk.n(g)
            expected += size
    if len(set(labels.values())) != len(labels) or len(labels) != expected:
        raise InvariantViolation(
            "labeling is not a bijection onto the target sequences",
            {"labels": len(set(labels.values())), "expected": expected},
        )
    for t, z in labels.items():
        if z.base != cond.class_of[t]:
            raise InvariantViolation(f"label of {t} is not over its class", {"node": t})
        if z_bar is not None and any(sk.value(z, g) != sk.value(z_bar, g) for g in fixed):
            raise InvariantViolation(f"label of {t} does not extend z̄", {"node": t})
    for t, s in itertools.product(labels, repeat=2):
        z, w = labels[t], labels[s]
        extends = sk.leq(z.base, w.base) and sk.restrict(z, w.base) == w
        if T.leq(t, s) != extends:
            raise InvariantViolation(
                "labeling does not match the tree order", {"pair": [t, s]}
            )


def lemma_g_iso(
    T: LTree,
    g: Mapping[str, SeqOver],
    ps: ProjectionSystem,
    condensed: Optional[CondensedTree] = None,
    max_order: int = DEFAULT_MAX_ORDER,
) -> IsoWitness:
    """Transfer Aut(T) onto the wreath product of ``ps`` through the order isomorphism g.

    Raises:
        BlockMismatch: If some g(t) is not in the block of the class of t.
        NotOrderIso: If g is not a bijection onto the canonical poset or breaks the order.
    """
    cond = condensed if condensed is not None else condense(T, max_order=max_order)
    for t in T.ids:
        if t not in g:
            raise NotOrderIso(f"g is undefined at {t}", {"node": t})
        cls = cond.class_of[t]
        if g[t].base != cls or g[t] not in ps.family.get(cls, ()):
            raise BlockMismatch(
                f"g({t}) = {format_seq(ps.skeleton, g[t])} is not in the block of {cls}",
                {"node": t, "class": cls},
            )
    images = [g[t] for t in T.ids]
    if len(set(images)) != len(images) or set(images) != set(ps.ground):
        raise NotOrderIso("g is not a bijection onto the canonical poset")
    poset = canonical_poset(ps)
    for t, s in itertools.product(T.ids, repeat=2):
        if T.leq(t, s) != poset.leq(g[t], g[s]):
            raise NotOrderIso(f"g breaks the order at ({t}, {s})", {"pair": [t, s]})
    source = aut_group(T, max_order)
    target = wreath_group(ps, None, max_order)
    return verify_conjugation(source, target, {t: g[t] for t in T.ids})


# Report assembly


def _digest(payload: Any) -> str:
    text = json.dumps(payload, sort_keys=True, default=str, ensure_ascii=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def space_digest(U: UltraSpace) -> str:
    return _digest(
        {
            "points": [str(p) for p in U.points],
            "dist": [[format_rational(v) for v in row] for row in U.dist],
        }
    )


def tree_digest(T: LTree) -> str:
    return _digest(
        {
            "levels": [format_rational(v) for v in T.order.labels],
            "nodes": [
                [t, lv, T.ids[p] if p is not None else None]
                for t, lv, p in zip(T.ids, T.level, T.parent)
            ],
        }
    )


def system_digest(ps: ProjectionSystem) -> str:
    sk = ps.skeleton
    return _digest(
        {
            "elements": list(sk.elements),
            "le": sorted(sk.le),
            "N": list(sk.N),
            "levels": [format_rational(v) for v in sk.levels] if sk.levels else None,
            "pi": sorted(
                [d, g, format_seq(sk, z), format_seq(sk, w)]
                for (d, g), table in ps.pi.items()
                for z, w in table.items()
            ),
        }
    )


def skeleton_artifact(sk: Skeleton) -> dict[str, Any]:
    return {
        "elements": list(sk.elements),
        "N": list(sk.N),
        "levels": [format_rational(v) for v in sk.levels] if sk.levels is not None else None,
        "covers": [list(p) for p in sk.covers()],
    }


class _Recorder:
    """Collects witnesses, orders and diagnostics for one pipeline run."""

    def __init__(self, pipeline: str, digest: str, include_timings: bool) -> None:
        self.pipeline = pipeline
        self.digest = digest
        self.include_timings = include_timings
        self.witnesses: list[WitnessRecord] = []
        self.orders: dict[str, int] = {}
        self.artifacts: dict[str, Any] = {}
        self.diagnostics: list[str] = []
        self.timings: dict[str, float] = {}
        self.failed = False
        self.diagnostic_only = False

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        logger.debug(f"{self.pipeline}: entering {name}")
        start = time.perf_counter()
        yield
        if self.include_timings:
            self.timings[name] = round((time.perf_counter() - start) * 1000, 3)

    def witness(self, name: str, witness: IsoWitness) -> None:
        self.witnesses.append(WitnessRecord.from_witness(name, witness))
        if not witness.verified:
            self.fail(f"{name}: {witness.reason}")

    def fail(self, message: str) -> None:
        self.failed = True
        self.diagnostics.append(message)

    def diagnose(self, message: str) -> None:
        logger.warning(f"{self.pipeline}: {message}")
        self.diagnostic_only = True
        self.diagnostics.append(message)

    def report(self) -> TheoremReport:
        if self.diagnostic_only:
            verdict = "DIAGNOSTIC"
        elif self.failed:
            verdict = "FAIL"
        else:
            verdict = "PASS"
        logger.info(f"{self.pipeline}: {verdict} with orders {self.orders}")
        return TheoremReport(
            pipeline=self.pipeline,
            input_digest=self.digest,
            verdict=verdict,
            witnesses=self.witnesses,
            orders=self.orders,
            artifacts=self.artifacts,
            diagnostics=self.diagnostics,
            timings_ms=self.timings,
        )


def stabilizer_correspondence(
    U: UltraSpace, ft: BallTree, G: PermGroup, A: PermGroup
) -> list[tuple[str, IsoWitness]]:
    """For each x, Iso(U)_x against Aut(F(U))_{(B(x, min L), min L)} through the singletons."""
    beta = {y: ft.singleton_node(y) for y in U.points}
    return [
        (
            f"stabilizer of {x}",
            verify_induced_conjugation(
                stabilizer(G, x), stabilizer(A, ft.singleton_node(x)), beta
            ),
        )
        for x in U.points
    ]


def _space_stages(
    rec: _Recorder, U: UltraSpace, max_order: int
) -> tuple[BallTree, PermGroup, PermGroup]:
    """F(U) with the Iso(U) ≅ Aut(F(U)) and stabilizer witnesses."""
    with rec.stage("ball_tree"):
        G = iso_group(U, max_order)
        L = canonical_levels(U, G)
        ft = functor_f(U, L)
        A = aut_group(ft.tree, max_order)
        rec.witness("Iso(U) ≅ Aut(F(U))", verify_f_iso(U, L, max_order))
        for name, witness in stabilizer_correspondence(U, ft, G, A):
            rec.witness(name, witness)
    rec.orders["iso"] = G.order
    rec.orders["aut"] = A.order
    rec.artifacts["levels"] = [format_rational(v) for v in L.labels]
    rec.artifacts["tree_nodes"] = len(ft.tree)
    return ft, G, A


def _lf_system(sk: Skeleton, labels: Mapping[str, SeqOver]) -> ProjectionSystem:
    family: dict[str, list[SeqOver]] = {}
    for z in labels.values():
        family.setdefault(z.base, []).append(z)
    return ProjectionSystem.build(sk, family)


# Homogeneous spaces


def space_from_skeleton(
    sk: Skeleton,
    levels: Optional[Mapping[str, Fraction]] = None,
    max_size: int = DEFAULT_MAX_ORDER,
) -> UltraSpace:
    """S^LF with d(x, y) the largest level among the δ where x and y differ.

    Levels come from ``levels``, else the skeleton's own map, else the chain
    positions 1..n of a linear skeleton.

    Raises:
        MissingLevels: If no level map is available for a non-linear skeleton.
        ValueError: If a level is not positive.
    """
    if levels is not None:
        lam = {d: Fraction(levels[d]) for d in sk.elements}
    elif sk.levels is not None:
        lam = {d: sk.level(d) for d in sk.elements}
    elif sk.is_linear():
        lam = {d: Fraction(i + 1) for i, d in enumerate(sk.linear_order())}
    else:
        raise MissingLevels("a non-linear skeleton needs an explicit level map")
    if any(v <= 0 for v in lam.values()):
        raise ValueError("levels must be positive")
    points = domain_from_supports(sk, "lf", max_size)
    pairs = {}
    for x, y in itertools.combinations(points, 2):
        pairs[(x, y)] = max(lam[d] for d, a, b in zip(sk.elements, x, y) if a != b)
    return UltraSpace.from_pairs(points, pairs)


def _homogeneous(
    U: UltraSpace, pipeline: str, max_order: int, include_timings: bool
) -> TheoremReport:
    rec = _Recorder(pipeline, space_digest(U), include_timings)
    if not is_homogeneous(U, iso_group(U, max_order)):
        rec.diagnose("space is not homogeneous: Iso(U) has several orbits")
        return rec.report()
    ft, G, _ = _space_stages(rec, U, max_order)
    T = ft.tree
    with rec.stage("condense"):
        cond = condense(T, max_order=max_order)
        if not is_homogeneous_tree(T, cond):
            rec.fail("condensed tree of a homogeneous space is not a chain")
            return rec.report()
        sk = label_N(T, cond)
    rec.artifacts["skeleton"] = skeleton_artifact(sk)
    try:
        with rec.stage("labeling"):
            bottom = cond.tree.level_nodes(0)[0]
            labels = labeling(T, (), bottom, None, cond).labels
            ps = _lf_system(sk, labels)
        with rec.stage("transfer"):
            rec.witness("Aut(F(U)) ≅ Wr^LF", lemma_g_iso(T, labels, ps, cond, max_order))
            W = wreath_group(ps, None, max_order)
            composite = {x: labels[ft.singleton_node(x)] for x in U.points}
            rec.witness("Iso(U) ≅ Wr^LF", verify_induced_conjugation(G, W, composite))
    except _REPORTED_ERRORS as e:
        rec.fail(f"forward direction: {e.message}")
        return rec.report()
    rec.orders["wreath"] = W.order

    with rec.stage("reverse"):
        V = space_from_skeleton(sk, max_size=max_order)
        rebuilt = iso_group(V, max_order)
        points = V.points.elements
        global_group = global_wreath_group(sk, points, None, max_order)
        identity = {x: x for x in V.points}
        rec.witness("Iso(rebuilt) = Wr^LF", verify_conjugation(rebuilt, global_group, identity))
    rec.orders["rebuilt"] = rebuilt.order
    if rebuilt.order != G.order:
        rec.fail(f"rebuilt space has {rebuilt.order} isometries, U has {G.order}")
    return rec.report()


def verify_homogeneous(
    U: UltraSpace, max_order: int = DEFAULT_MAX_ORDER, include_timings: bool = False
) -> TheoremReport:
    """Iso(U) ≅ Aut(F(U)) ≅ Wr^LF Sym(N_δ) over a linear skeleton, and back."""
    return _homogeneous(U, "homogeneous", max_order, include_timings)


def verify_discrete_homogeneous(
    U: UltraSpace, max_order: int = DEFAULT_MAX_ORDER, include_timings: bool = False
) -> TheoremReport:
    """The homogeneous pipeline for uniformly discrete spaces; finite spaces always are."""
    report = _homogeneous(U, "discrete", max_order, include_timings)
    if U.distance_set:
        report.artifacts["discreteness_radius"] = format_rational(U.distance_set[0])
    return report


# General spaces and trees


def _tree_input(
    rec: _Recorder, source: Union[UltraSpace, LTree], max_order: int
) -> tuple[LTree, Optional[BallTree]]:
    if isinstance(source, UltraSpace):
        ft, _, _ = _space_stages(rec, source, max_order)
        return ft.tree, ft
    return source, None


def _digest_of(source: Union[UltraSpace, LTree]) -> str:
    return space_digest(source) if isinstance(source, UltraSpace) else tree_digest(source)


def _check_tree_hypotheses(rec: _Recorder, T: LTree, cond: CondensedTree) -> bool:
    if not is_pruned(T):
        rec.diagnose("tree is not pruned")
        return False
    if not is_special(T, cond):
        rec.diagnose("condensed tree is not an L-tree")
        return False
    return True


def verify_general(
    source: Union[UltraSpace, LTree],
    max_order: int = DEFAULT_MAX_ORDER,
    include_timings: bool = False,
) -> TheoremReport:
    """Aut(T) ≅ Wr^{LF,π} Sym(N_δ) with π read off one labeling per bottom class.

    With δ_j the bottom classes and j_β the least j such that δ_j ≤ β,
    π_{δγ}(z_t) = z^(j_γ)_{t|_λ(γ)} and g(t) = z^(j_[t])_t. The finite
    character partition of the up-set of δ is {γ ≥ δ : j_γ = j} over j.
    """
    rec = _Recorder("general", _digest_of(source), include_timings)
    T, _ = _tree_input(rec, source, max_order)
    with rec.stage("condense"):
        cond = condense(T, max_order=max_order)
        if not _check_tree_hypotheses(rec, T, cond):
            return rec.report()
        sk = label_N(T, cond)
    rec.artifacts["skeleton"] = skeleton_artifact(sk)
    Q = cond.tree
    bottoms = Q.level_nodes(0)
    try:
        with rec.stage("labeling"):
            runs = [labeling(T, (), d, None, cond).labels for d in bottoms]
        j_of = {b: min(j for j, d in enumerate(bottoms) if sk.leq(d, b)) for b in sk.elements}
        g = {t: runs[j_of[cond.class_of[t]]][t] for t in T.ids}
        family = {d: [g[t] for t in cond.members[d]] for d in sk.elements}
        overrides: dict[tuple[str, str], dict[SeqOver, SeqOver]] = {}
        for d in sk.elements:
            for gamma in sk.up_set(d):
                lv = Q.level[Q.pos(gamma)]
                overrides[(d, gamma)] = {
                    runs[j_of[d]][t]: runs[j_of[gamma]][T.up(t, lv)] for t in cond.members[d]
                }
        ps = ProjectionSystem.build(sk, family, overrides)
        with rec.stage("system"):
            report = validate_projection_system(ps)
            if not report.ok:
                rec.fail(f"projection system fails {report.violations[0].axiom}")
                return rec.report()
            for d in sk.elements:
                ups = sk.up_set(d)
                pieces = [
                    tuple(b for b in ups if j_of[b] == j) for j in sorted({j_of[b] for b in ups})
                ]
                if not is_character_partition(ps, d, pieces):
                    rec.fail(f"the j-partition of the up-set of {d} is not a finite character")
            if not is_locally_homogeneous(ps, max_order):
                rec.fail("projection system is not locally homogeneous")
            if len(bottoms) == 1 and not ps.is_trivial():
                rec.fail("single bottom class but non-trivial projections")
        with rec.stage("transfer"):
            witness = lemma_g_iso(T, g, ps, cond, max_order)
            rec.witness("Aut(T) ≅ Wr^{LF,π}", witness)
    except _REPORTED_ERRORS as e:
        rec.fail(e.message)
        return rec.report()

    rec.orders.setdefault("aut", witness.source.order)
    rec.orders["wreath"] = witness.target.order
    rec.artifacts["bottom_classes"] = list(bottoms)
    rec.artifacts["j"] = {b: j_of[b] for b in sk.elements}
    rec.artifacts["twisted"] = sorted(
        f"{d}->{gamma}"
        for (d, gamma), table in ps.pi.items()
        if any(w != sk.restrict(z, gamma) for z, w in table.items())
    )
    rec.artifacts["labels"] = {t: format_seq(sk, z) for t, z in g.items()}
    return rec.report()


def cross_class_labeling(T: LTree, cond: CondensedTree) -> dict[str, SeqOver]:
    """One π-free labeling of all of T, extending class by class through chains above the split.

    The first bottom class is labeled with the empty chain. For a later class
    δ_j, ℓ̄ is the least splitting level against the earlier ones, and every
    chain {t'|_ℓ : ℓ > ℓ̄} over a node t' of an earlier class δ_j' with that
    splitting level is extended downwards by its own labeling.

    Raises:
        InvariantViolation: If two steps label one node or some node stays unlabeled.
    """
    Q = cond.tree
    bottoms = Q.level_nodes(0)
    labels: dict[str, SeqOver] = dict(labeling(T, (), bottoms[0], None, cond).labels)
    for j in range(1, len(bottoms)):
        splits = [(Q.order.index_of(spl(Q, bottoms[i], bottoms[j])), i) for i in range(j)]
        l_bar, earlier = min(splits)
        minima = dict.fromkeys(T.up(t, l_bar + 1) for t in cond.members[bottoms[earlier]])
        for c in minima:
            chain = T.up_set(c)
            step = labeling(T, chain, bottoms[j], labels[c], cond)
            clash = set(step.labels) & set(labels)
            if clash:
                raise InvariantViolation("a node was labeled twice", {"nodes": sorted(clash)})
            labels.update(step.labels)
    missing = [t for t in T.ids if t not in labels]
    if missing:
        raise InvariantViolation("some nodes lie below no chain", {"nodes": missing})
    return labels


def verify_exact(
    source: Union[UltraSpace, LTree],
    depth: int = 1,
    max_order: int = DEFAULT_MAX_ORDER,
    include_timings: bool = False,
) -> TheoremReport:
    """Aut(T) ≅ Wr^LF Sym(N_δ) with no projections, via the cross-class labeling.

    Spaces are also checked for exactness, and G(pad_chain(F(U), depth)) under
    the standard level embedding must be exact again.
    """
    rec = _Recorder("exact", _digest_of(source), include_timings)
    T, ft = _tree_input(rec, source, max_order)
    with rec.stage("condense"):
        cond = condense(T, max_order=max_order)
        if not _check_tree_hypotheses(rec, T, cond):
            return rec.report()
        sk = label_N(T, cond)
    rec.artifacts["skeleton"] = skeleton_artifact(sk)
    with rec.stage("star"):
        star = property_star(T, cond.group)
        if not star.holds:
            rec.fail(f"property (★) fails at {star.counterexample}")
            return rec.report()
    try:
        with rec.stage("labeling"):
            labels = cross_class_labeling(T, cond)
            ps = _lf_system(sk, labels)
        with rec.stage("transfer"):
            witness = lemma_g_iso(T, labels, ps, cond, max_order)
            rec.witness("Aut(T) ≅ Wr^LF", witness)
    except _REPORTED_ERRORS as e:
        rec.fail(e.message)
        return rec.report()
    rec.orders.setdefault("aut", witness.source.order)
    rec.orders["wreath"] = witness.target.order

    if isinstance(source, UltraSpace) and ft is not None:
        with rec.stage("exactness"):
            if not is_exact(source, iso_group(source, max_order)):
                rec.fail("space is not exact")
            padded = pad_chain(T, depth)
            rec.witness("Aut(pad(F(U))) ≅ Aut(F(U))", verify_pad_chain(T, depth, max_order))
            V = functor_g(padded, LevelEmbedding.standard(padded.order))
            if not is_exact(V, iso_group(V, max_order, cross_check=False)):
                rec.fail("tree metric of the padded ball tree is not exact")
        rec.artifacts["padded_points"] = len(V)
    return rec.report()


# Skeleton diagnostics


def is_quasi_maximal(sk: Skeleton, m: int) -> bool:
    """Every N_δ is 1 or at least m."""
    if m < 1:
        raise ValueError("m must be positive")
    return all(n == 1 or n >= m for n in sk.N)


def simplify_skeleton(
    sk: Skeleton, max_order: int = DEFAULT_MAX_ORDER
) -> tuple[Skeleton, IsoWitness]:
    """Drop the N=1 elements of a linear skeleton, keeping the bottom one if it has N=1.

    Returns:
        tuple[Skeleton, IsoWitness]: The reduced chain and the witness that
        x ↦ x restricted to the kept coordinates conjugates the two products.

    Raises:
        NotLinear: If the skeleton is not a chain.
    """
    if not sk.is_linear():
        raise NotLinear("simplification needs a linear skeleton", {"elements": list(sk.elements)})
    bottom = sk.linear_order()[0]
    keep = [d for d in sk.elements if sk.n(d) > 1 or d == bottom]
    reduced = sk.sub_skeleton(keep)
    S = domain_from_supports(sk, "lf", max_order)
    R = domain_from_supports(reduced, "lf", max_order)
    positions = [sk.index[d] for d in reduced.elements]
    beta = {x: tuple(x[p] for p in positions) for x in S}
    witness = verify_conjugation(
        global_wreath_group(sk, S, None, max_order),
        global_wreath_group(reduced, R, None, max_order),
        beta,
    )
    return reduced, witness


def urysohn_diagnostics(
    U: UltraSpace, m: int, max_order: int = DEFAULT_MAX_ORDER
) -> UrysohnReport:
    """m-wideness per distance and quasi-maximality of the condensed skeleton.

    Raises:
        NotLinear: If the condensed skeleton of F(U) is not a chain.
    """
    G = iso_group(U, max_order)
    ft = functor_f(U, canonical_levels(U, G))
    sk = label_N(ft.tree, condense(ft.tree, max_order=max_order))
    if not sk.is_linear():
        raise NotLinear("condensed skeleton is not linear", {"elements": list(sk.elements)})
    reduced, witness = simplify_skeleton(sk, max_order)
    chain = sk.linear_order()
    return UrysohnReport(
        bound=m,
        skeleton_N=[sk.n(d) for d in chain],
        wide={format_rational(r): ok for r, ok in wideness_profile(U, m).items()},
        quasi_maximal=is_quasi_maximal(sk, m),
        simplified_N=[reduced.n(d) for d in reduced.linear_order()],
        simplify_witness=WitnessRecord.from_witness("Wr(Δ) ≅ Wr(Δ')", witness),
    )


# Wreath products back to trees


def roundtrip_wreath(
    bundle: WreathInput,
    depth: Optional[int] = None,
    pad_below: int = 0,
    pad_above: int = 0,
    max_order: int = DEFAULT_MAX_ORDER,
    include_timings: bool = False,
) -> TheoremReport:
    """Pad the bundle, build the truncated tree T_P and check Wr^{𝐒,π} ≅ Aut(T_P).

    ``depth`` defaults to |Δ| + 2 over the padded skeleton. A skeleton whose
    levels do not form an L-tree is reported DIAGNOSTIC.

    Raises:
        DepthTooSmall: If ``depth`` is below |Δ| + 1 of the padded skeleton.
        MissingLevels: If the skeleton has no level map.
    """
    ps = as_system(bundle, max_order)
    rec = _Recorder("roundtrip", system_digest(ps), include_timings)
    if ps.skeleton.levels is None:
        raise MissingLevels("roundtrip needs a level map on the skeleton")
    shape = validate_skeleton(ps.skeleton)
    if not shape.ok:
        for v in shape.violations:
            rec.diagnose(f"skeleton with its levels is not an L-tree: {v.message}")
        return rec.report()
    embedding: dict[Hashable, Hashable] = {z: z for z in ps.ground}
    current = ps
    with rec.stage("padding"):
        steps = (("pad_bottom", pad_bottom, pad_below), ("pad_top", pad_top, pad_above))
        for name, pad, k in steps:
            if k > 0:
                padded = pad(current, k, max_order)
                rec.witness(f"Wr ≅ Wr({name})", padded.witness)
                moved = padded.embedding
                embedding = {z: moved[w] for z, w in embedding.items()}
                current = padded.system
    sk = current.skeleton
    k = depth if depth is not None else len(sk) + 2
    lambda_p = {z: sk.level(z.base) for z in current.ground}
    with rec.stage("tree"):
        built = tree_from_wreath(current, k, lambda_p, max_order)
        rec.witness("Aut*(P) ≅ Aut(T_P)", built.witness)
        source = wreath_group(ps, None, max_order)
        composite = {z: built.node_of[embedding[z]] for z in ps.ground}
        rec.witness(
            "Wr ≅ Aut(T_P)",
            verify_induced_conjugation(source, built.witness.target, composite),
        )
    rec.orders["wreath"] = source.order
    rec.orders["aut"] = built.witness.target.order
    rec.artifacts["depth"] = k
    rec.artifacts["tree_nodes"] = len(built.tree)
    rec.artifacts["skeleton"] = skeleton_artifact(sk)
    return rec.report()
