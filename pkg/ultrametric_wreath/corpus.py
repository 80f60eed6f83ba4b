"""Seeded random inputs: ultrametric spaces, pruned trees and projection systems.

Spaces come from random nested partitions (a leveled tree whose leaves are
the points), so the strong triangle inequality holds by construction. Every
generator takes an explicit ``random.Random`` so a seed fixes the output.
"""

import itertools
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Optional

from .config import CorpusConfig
from .ltree import LinearOrder, LTree
from .models import BatchReport
from .permgroup import DEFAULT_MAX_ORDER
from .pipelines import verify_general
from .skeleton import SeqOver, Skeleton
from .ultrametric import UltraSpace, format_rational
from .wreath import ProjectionSystem, product_size

logger = logging.getLogger(__name__)

MAX_SYSTEM_ELEMENTS = 4
MAX_SYSTEM_SIZE = 8
MAX_TREE_NODES = 8


def _split(rng: random.Random, block: list[str]) -> list[list[str]]:
    """Randomly split a block into at most three nonempty parts."""
    parts = rng.randint(1, min(3, len(block)))
    labels = [rng.randrange(parts) for _ in block]
    pieces = [[p for p, lab in zip(block, labels) if lab == i] for i in range(parts)]
    return [piece for piece in pieces if piece]


def random_space(rng: random.Random, max_points: int) -> UltraSpace:
    """A random finite ultrametric space with 1..max_points points."""
    n = rng.randint(1, max_points)
    points = [f"p{i}" for i in range(n)]
    height = rng.randint(1, 3)
    radii = sorted(rng.sample(range(1, 10), height))
    partition = [points]
    # block index of each point at each radius, finest first
    block_at: list[dict[str, int]] = []
    for _ in range(height):
        partition = [piece for block in partition for piece in _split(rng, block)]
        block_at.append({p: i for i, block in enumerate(partition) for p in block})
    block_at.reverse()

    pairs = {}
    for x, y in itertools.combinations(points, 2):
        distance = Fraction(radii[-1]) * 2
        for radius, blocks in zip(radii, block_at):
            if blocks[x] == blocks[y]:
                distance = Fraction(radius)
                break
        pairs[(x, y)] = distance
    return UltraSpace.from_pairs(points, pairs)


def random_pruned_tree(rng: random.Random, max_nodes: int = MAX_TREE_NODES) -> LTree:
    """A random pruned L-tree over integer levels with at most ``max_nodes`` nodes."""
    while True:
        height = rng.randint(1, 3)
        entries: list[tuple[str, int, Optional[str]]] = [("r", height - 1, None)]
        frontier = ["r"]
        for level in range(height - 2, -1, -1):
            nxt = []
            for parent in frontier:
                for c in range(rng.randint(1, 2)):
                    node = f"{parent}{c}"
                    entries.append((node, level, parent))
                    nxt.append(node)
            frontier = nxt
        if len(entries) <= max_nodes:
            order = LinearOrder(tuple(Fraction(i + 1) for i in range(height)))
            return LTree.build(order, entries)


def _random_skeleton(rng: random.Random) -> Skeleton:
    """A treeable skeleton: a random rooted tree on at most four elements."""
    while True:
        n = rng.randint(1, MAX_SYSTEM_ELEMENTS)
        names = [f"d{i + 1}" for i in range(n)]
        parent: dict[str, Optional[str]] = {names[0]: None}
        depth = {names[0]: 0}
        for name in names[1:]:
            above = rng.choice(names[: names.index(name)])
            parent[name] = above
            depth[name] = depth[above] + 1
        pairs = [(name, p) for name, p in parent.items() if p is not None]
        top = max(depth.values())
        levels = {name: Fraction(top - depth[name] + 1) for name in names}
        N = {name: rng.randint(1, 3) for name in names}
        sk = Skeleton.build(names, pairs, N, levels)
        total = sum(product_size(sk.sub_skeleton(sk.up_set(d))) for d in sk.elements)
        if total <= MAX_SYSTEM_SIZE:
            return sk


def random_projection_system(rng: random.Random) -> ProjectionSystem:
    """All sequences over a random skeleton, with projections twisted on the target fibres.

    For each γ a random permutation of the bottom coordinate, chosen per
    value of the coordinates above γ, is applied after restriction to γ.
    Coordinates above γ are untouched, so the maps compose and stay
    congruent.
    """
    sk = _random_skeleton(rng)
    family = {
        d: [
            SeqOver(d, values)
            for values in itertools.product(*(range(sk.n(g)) for g in sk.up_set(d)))
        ]
        for d in sk.elements
    }
    twist: dict[str, dict[SeqOver, SeqOver]] = {}
    for g in sk.elements:
        pos = sk.position(g, g)
        shuffles: dict[tuple[int, ...], list[int]] = {}
        table = {}
        for w in family[g]:
            rest = w.values[:pos] + w.values[pos + 1 :]
            if rest not in shuffles:
                shuffles[rest] = rng.sample(range(sk.n(g)), sk.n(g))
            values = list(w.values)
            values[pos] = shuffles[rest][w.values[pos]]
            table[w] = SeqOver(g, tuple(values))
        twist[g] = table
    overrides = {
        (d, g): {z: twist[g][sk.restrict(z, g)] for z in family[d]}
        for d in sk.elements
        for g in sk.up_set(d)
        if g != d
    }
    return ProjectionSystem.build(sk, family, overrides)


def generate_corpus(config: CorpusConfig) -> list[UltraSpace]:
    rng = random.Random(config.seed)
    return [random_space(rng, config.max_points) for _ in range(config.count)]


def _run_instance(args: tuple[int, UltraSpace, int]) -> dict[str, Any]:
    index, space, max_order = args
    report = verify_general(space, max_order=max_order)
    return {
        "index": index,
        "points": len(space),
        "distances": [format_rational(r) for r in space.distance_set],
        "verdict": report.verdict,
        "orders": report.orders,
        "digest": report.input_digest,
    }


def run_corpus(
    spaces: list[UltraSpace],
    config: CorpusConfig,
    workers: int = 1,
    max_order: int = DEFAULT_MAX_ORDER,
) -> BatchReport:
    """Run verify_general on every space; results keep corpus order."""
    jobs = [(i, space, max_order) for i, space in enumerate(spaces)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            instances = list(pool.map(_run_instance, jobs))
    else:
        instances = [_run_instance(job) for job in jobs]
    verdicts: dict[str, int] = {}
    for item in instances:
        verdicts[item["verdict"]] = verdicts.get(item["verdict"], 0) + 1
    logger.info(f"corpus seed {config.seed}: {verdicts}")
    return BatchReport(
        seed=config.seed,
        count=len(spaces),
        max_points=config.max_points,
        verdicts=verdicts,
        instances=instances,
    )
