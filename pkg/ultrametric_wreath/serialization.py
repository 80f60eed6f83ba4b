"""Reading input files and writing reports.

Input files are JSON documents matching one of the schemas in ``models``.
The kind is taken from the ``"kind"`` tag when present, otherwise from the
characteristic keys. Reports are written with sorted keys and two-space
indentation so identical runs produce identical bytes.
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ValidationError

from .errors import ParseError, SchemaError
from .functors import LevelEmbedding
from .ltree import LinearOrder, LTree
from .models import (
    EmbeddingFile,
    NodeEntry,
    PiEntry,
    SkeletonFile,
    SpaceFile,
    SystemFile,
    TheoremReport,
    TreeFile,
)
from .permgroup import DEFAULT_MAX_ORDER, GroundSet, Permutation, PermGroup, closure
from .skeleton import SeqOver, Skeleton, seq_as_map, seq_from_map
from .ultrametric import UltraSpace, format_rational
from .wreath import ProjectionSystem

logger = logging.getLogger(__name__)

KINDS = ("space", "tree", "embedding", "skeleton", "system")

_SCHEMAS: dict[str, type[BaseModel]] = {
    "space": SpaceFile,
    "tree": TreeFile,
    "embedding": EmbeddingFile,
    "skeleton": SkeletonFile,
    "system": SystemFile,
}

Loaded = Union[UltraSpace, LTree, Skeleton, ProjectionSystem, EmbeddingFile]


def parse_json(text: str, source: str = "<input>") -> Any:
    """Parse JSON text.

    Raises:
        ParseError: On a syntax error, with its line and column.
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(
            f"{source}:{e.lineno}:{e.colno}: {e.msg}",
            {"source": source, "line": e.lineno, "column": e.colno},
        ) from e


def read_json(path: Union[str, Path]) -> Any:
    """Read and parse a UTF-8 JSON file.

    Raises:
        ParseError: If the file cannot be read or is not valid JSON.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ParseError(f"cannot read {p}: {e}", {"source": str(p)}) from e
    return parse_json(text, str(p))


def detect_kind(data: Any) -> str:
    """Return the schema kind of a parsed document.

    Raises:
        SchemaError: If no schema matches.
    """
    if not isinstance(data, dict):
        raise SchemaError("top-level JSON value must be an object")
    tag = data.get("kind")
    if tag is not None:
        if tag not in KINDS:
            raise SchemaError(f"unknown kind {tag!r}", {"kind": tag})
        return tag
    if "dist" in data:
        return "space"
    if "nodes" in data:
        return "tree"
    if "pi" in data or "family" in data:
        return "system"
    if "elements" in data and "N" in data:
        return "skeleton"
    if "pairs" in data:
        return "embedding"
    raise SchemaError("cannot tell the input kind from its keys", {"keys": sorted(data)})


def validate_schema(data: Any, kind: str) -> BaseModel:
    """Validate a parsed document against the schema of ``kind``.

    Raises:
        SchemaError: If validation fails; pydantic's error list is kept in details.
    """
    try:
        return _SCHEMAS[kind].model_validate(data)
    except ValidationError as e:
        raise SchemaError(
            f"invalid {kind} file: {e.error_count()} error(s)",
            {"errors": json.loads(e.json(include_url=False))},
        ) from e


# File models to domain objects


def space_from_file(model: SpaceFile) -> UltraSpace:
    try:
        return UltraSpace.from_matrix(model.points, model.dist)
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"invalid space: {e}") from e


def tree_from_file(model: TreeFile) -> LTree:
    try:
        order = LinearOrder.of(model.levels)
        entries = [(n.id, n.level, n.parent) for n in model.nodes]
        if any(n.level >= len(order) for n in model.nodes):
            raise ValueError("node level index beyond the level list")
        return LTree.build(order, entries)
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"invalid tree: {e}") from e


def embedding_from_file(model: EmbeddingFile, order: LinearOrder) -> LevelEmbedding:
    try:
        pairs = {
            Fraction(key): (Fraction(minus), Fraction(plus))
            for key, (minus, plus) in model.pairs.items()
        }
        return LevelEmbedding.from_pairs(order, pairs)
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"invalid level embedding: {e}") from e


def skeleton_from_file(model: SkeletonFile) -> Skeleton:
    try:
        levels = None
        if model.levels is not None:
            levels = {d: Fraction(v) for d, v in model.levels.items()}
        return Skeleton.build(model.elements, [tuple(p) for p in model.le], model.N, levels)
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"invalid skeleton: {e}") from e


def system_from_file(
    model: SystemFile, max_order: int = DEFAULT_MAX_ORDER
) -> tuple[ProjectionSystem, dict[str, PermGroup]]:
    """Build the projection system and the coordinate groups listed in the file.

    Raises:
        SchemaError: If a sequence or generator does not fit the skeleton.
    """
    sk = skeleton_from_file(model.skeleton)
    unknown = (set(model.family) | set(model.groups)) - set(sk.elements)
    if unknown:
        raise SchemaError(f"unknown skeleton elements {sorted(unknown)}")
    try:
        family = {
            d: [seq_from_map(sk, d, values) for values in rows]
            for d, rows in model.family.items()
        }
        overrides: dict[tuple[str, str], dict[SeqOver, SeqOver]] = {}
        for row in model.pi:
            z = seq_from_map(sk, row.source, row.sequence)
            overrides.setdefault((row.source, row.target), {})[z] = seq_from_map(
                sk, row.target, row.image
            )
        groups = {}
        for d, generators in model.groups.items():
            ground = GroundSet(tuple(range(sk.n(d))))
            perms = [Permutation(ground, tuple(g)) for g in generators]
            groups[d] = closure(perms, max_order, ground)
    except (KeyError, ValueError) as e:
        raise SchemaError(f"invalid projection system: {e}") from e
    for source, target in overrides:
        if not sk.leq(source, target):
            raise SchemaError(f"projection row {source} -> {target} is not along the order")
    return ProjectionSystem.build(sk, family, overrides), groups


def load_input(path: Union[str, Path], expect: Optional[str] = None) -> tuple[str, Loaded]:
    """Read a file and convert it to its domain object.

    Args:
        path (Union[str, Path]): The JSON file.
        expect (Optional[str]): Required kind; the detected kind must match.

    Returns:
        tuple[str, Loaded]: The kind and the object (embeddings stay file models).

    Raises:
        ParseError: If the file is not valid JSON.
        SchemaError: If it matches no schema or not the expected one.
    """
    data = read_json(path)
    kind = detect_kind(data)
    if expect is not None and kind != expect:
        raise SchemaError(f"expected a {expect} file, found {kind}", {"kind": kind})
    model = validate_schema(data, kind)
    logger.debug(f"loaded {kind} from {path}")
    if kind == "space":
        return kind, space_from_file(model)
    if kind == "tree":
        return kind, tree_from_file(model)
    if kind == "skeleton":
        return kind, skeleton_from_file(model)
    if kind == "system":
        return kind, system_from_file(model)[0]
    return kind, model


# Domain objects to file models


def space_to_file(U: UltraSpace) -> SpaceFile:
    return SpaceFile(
        kind="space",
        points=[str(p) for p in U.points],
        dist=[[format_rational(v) for v in row] for row in U.dist],
    )


def tree_to_file(T: LTree) -> TreeFile:
    return TreeFile(
        kind="tree",
        levels=[format_rational(v) for v in T.order.labels],
        nodes=[
            NodeEntry(id=t, level=lv, parent=T.ids[p] if p is not None else None)
            for t, lv, p in zip(T.ids, T.level, T.parent)
        ],
    )


def skeleton_to_file(sk: Skeleton) -> SkeletonFile:
    return SkeletonFile(
        kind="skeleton",
        elements=list(sk.elements),
        le=[list(p) for p in sk.covers()],
        N=dict(zip(sk.elements, sk.N)),
        levels={d: format_rational(sk.level(d)) for d in sk.elements} if sk.levels else None,
    )


def system_to_file(ps: ProjectionSystem) -> SystemFile:
    """Only projection rows that differ from restriction are written."""
    sk = ps.skeleton
    rows = [
        PiEntry(source=d, target=g, sequence=seq_as_map(sk, z), image=seq_as_map(sk, w))
        for (d, g), table in sorted(ps.pi.items())
        for z, w in sorted(table.items())
        if w != sk.restrict(z, g)
    ]
    return SystemFile(
        kind="system",
        skeleton=skeleton_to_file(sk),
        family={d: [seq_as_map(sk, z) for z in ps.family[d]] for d in sk.elements},
        pi=rows,
    )


# Report output


def dump_json(payload: Union[BaseModel, dict[str, Any]]) -> str:
    """Canonical JSON: sorted keys, two-space indentation, trailing newline."""
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _text_lines(data: Any, indent: int = 0) -> list[str]:
    pad = "  " * indent
    if isinstance(data, dict):
        lines = []
        for key in sorted(data):
            value = data[key]
            if isinstance(value, (dict, list)) and value:
                lines.append(f"{pad}{key}:")
                lines.extend(_text_lines(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {value}")
        return lines
    if isinstance(data, list):
        lines = []
        for item in data:
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}-")
                lines.extend(_text_lines(item, indent + 1))
            else:
                lines.append(f"{pad}- {item}")
        return lines
    return [f"{pad}{data}"]


def render_text(payload: Union[BaseModel, dict[str, Any]]) -> str:
    """Human-readable rendering of the same data as ``dump_json``."""
    if isinstance(payload, TheoremReport):
        head = [f"{payload.pipeline}: {payload.verdict}"]
        for w in payload.witnesses:
            mark = "ok" if w.verified else "FAILED"
            head.append(f"  [{mark}] {w.name} ({w.source_order} -> {w.target_order})")
        rest = payload.model_dump(mode="json", exclude={"pipeline", "verdict", "witnesses"})
        return "\n".join(head + _text_lines(rest)) + "\n"
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    return "\n".join(_text_lines(data)) + "\n"


def render(payload: Union[BaseModel, dict[str, Any]], fmt: str) -> str:
    return dump_json(payload) if fmt == "json" else render_text(payload)
