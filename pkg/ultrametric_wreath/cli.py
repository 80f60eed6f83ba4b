"""Command-line interface.

Every subcommand reads JSON input files, runs one construction or pipeline and
writes a canonical report to stdout (or ``--report``). Constructed objects
can additionally be written with ``--output`` in the input file format, so
commands chain. Library errors map to their class exit codes.
"""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from . import __version__
from .config import AppConfig, CorpusConfig, GuardConfig, OutputConfig, load_config
from .corpus import generate_corpus, run_corpus
from .errors import SchemaError, UltrametricWreathError
from .functors import (
    LevelEmbedding,
    canonical_levels,
    functor_f,
    functor_g,
    functor_u,
    g_fullness_diagnostic,
    rigid_comb,
    verify_comb_contract,
    verify_f_iso,
)
from .ltree import (
    LinearOrder,
    LTree,
    aut_group,
    condense,
    is_pruned,
    is_special,
    label_N,
    property_star,
    validate_ltree,
    validate_skeleton,
)
from .models import TheoremReport, ValidationReport, WitnessRecord
from .permgroup import PermGroup
from .pipelines import (
    roundtrip_wreath,
    urysohn_diagnostics,
    verify_discrete_homogeneous,
    verify_exact,
    verify_general,
    verify_homogeneous,
)
from .serialization import (
    detect_kind,
    dump_json,
    embedding_from_file,
    load_input,
    read_json,
    render,
    skeleton_to_file,
    space_to_file,
    system_from_file,
    system_to_file,
    tree_to_file,
    validate_schema,
)
from .skeleton import Skeleton, format_seq
from .ultrametric import (
    UltraSpace,
    as_rational,
    components,
    is_exact,
    iso_group,
    iso_group_brute,
    validate_space,
)
from .wreath import (
    SUPPORT_TAGS,
    ProjectionSystem,
    SkeletonBundle,
    as_system,
    brute_wreath_oracle,
    has_finite_character,
    is_full,
    is_locally_homogeneous,
    rho,
    tree_from_wreath,
    validate_projection_system,
    verify_rho,
    wreath_group,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 3

PIPELINES = ("homogeneous", "discrete", "exact", "general", "roundtrip")


# Helpers


def _group_payload(G: PermGroup) -> dict[str, Any]:
    return {
        "order": G.order,
        "ground": [str(x) for x in G.ground],
        "elements": [g.one_line() for g in G.elements],
    }


def _emit(
    payload: Union[BaseModel, dict[str, Any]], args: argparse.Namespace, config: AppConfig
) -> None:
    text = render(payload, config.output.format)
    if getattr(args, "report", None):
        Path(args.report).write_text(text, encoding="utf-8")
        logger.info(f"report written to {args.report}")
    else:
        sys.stdout.write(text)


def _write_output(model: BaseModel, args: argparse.Namespace) -> None:
    if getattr(args, "output", None):
        Path(args.output).write_text(dump_json(model), encoding="utf-8")
        logger.info(f"output written to {args.output}")


def _load(path: str, kind: str) -> Any:
    return load_input(path, kind)[1]


def _tree_or_space(path: str, config: AppConfig) -> LTree:
    """Trees are used as given; spaces go through F with their canonical levels."""
    kind, obj = load_input(path)
    if isinstance(obj, LTree):
        return obj
    if isinstance(obj, UltraSpace):
        G = iso_group(obj, config.guards.max_order)
        return functor_f(obj, canonical_levels(obj, G)).tree
    raise SchemaError(f"expected a space or tree file, found {kind}", {"kind": kind})


def _levels(raw: Optional[str]) -> Optional[LinearOrder]:
    if raw is None:
        return None
    try:
        return LinearOrder.of([v.strip() for v in raw.split(",") if v.strip()])
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"invalid level list {raw!r}: {e}") from e


def _radii(raw: Optional[str]) -> Optional[list[Fraction]]:
    if raw is None:
        return None
    try:
        return [as_rational(v) for v in raw.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"invalid radii list {raw!r}: {e}") from e


# Commands


def cmd_validate(args: argparse.Namespace, config: AppConfig) -> int:
    """Validate any input file; exit 0 iff the matching validator reports no violation."""
    data = read_json(args.input)
    kind = detect_kind(data)
    model = validate_schema(data, kind)
    _, obj = load_input(args.input, kind)
    if isinstance(obj, UltraSpace):
        report = validate_space(obj)
    elif isinstance(obj, LTree):
        report = validate_ltree(obj)
    elif isinstance(obj, ProjectionSystem):
        report = validate_projection_system(obj)
    elif isinstance(obj, Skeleton):
        report = validate_skeleton(obj)
    else:
        order = LinearOrder.of(sorted(model.pairs, key=Fraction))
        embedding_from_file(model, order)
        report = ValidationReport.from_violations("embedding", [])
    _emit(report, args, config)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_iso(args: argparse.Namespace, config: AppConfig) -> int:
    U = _load(args.input, "space")
    G = iso_group(U, config.guards.max_order)
    payload = _group_payload(G)
    payload["components"] = [[str(x) for x in c] for c in components(U, G)]
    payload["homogeneous"] = len(payload["components"]) == 1
    payload["exact"] = is_exact(U, G)
    if args.brute:
        payload["brute_force_agrees"] = iso_group_brute(U).same_elements(G)
    _emit(payload, args, config)
    return EXIT_OK


def cmd_aut(args: argparse.Namespace, config: AppConfig) -> int:
    T = _tree_or_space(args.input, config)
    G = aut_group(T, config.guards.max_order)
    payload = _group_payload(G)
    payload["pruned"] = is_pruned(T)
    payload["special"] = is_special(T, condense(T, G))
    payload["star"] = property_star(T, G).holds
    _emit(payload, args, config)
    return EXIT_OK


def cmd_functor(args: argparse.Namespace, config: AppConfig) -> int:
    max_order = config.guards.max_order
    if args.which == "f":
        U = _load(args.input, "space")
        L = _levels(args.levels)
        if L is None:
            L = canonical_levels(U)
        ft = functor_f(U, L)
        witness = verify_f_iso(U, L, max_order)
        _write_output(tree_to_file(ft.tree), args)
        payload = {
            "tree": tree_to_file(ft.tree).model_dump(mode="json"),
            "witness": WitnessRecord.from_witness("Iso(U) ≅ Aut(F(U))", witness).model_dump(),
        }
        _emit(payload, args, config)
        return EXIT_OK if witness.verified else EXIT_FAIL
    if args.which == "g":
        T = _load(args.input, "tree")
        if args.embedding:
            model = _load(args.embedding, "embedding")
            emb = embedding_from_file(model, T.order)
        else:
            emb = LevelEmbedding.standard(T.order)
        V = functor_g(T, emb)
        fullness = g_fullness_diagnostic(T, emb, max_order)
        _write_output(space_to_file(V), args)
        payload = {
            "space": space_to_file(V).model_dump(mode="json"),
            "fullness": fullness.model_dump(),
        }
        _emit(payload, args, config)
        return EXIT_OK
    U = _load(args.input, "space")
    radii = _radii(args.radii)
    k = args.depth or (len(radii).bit_length() if radii else 2)
    if radii is None:
        D = U.distance_set
        scale = D[0] if D else Fraction(1)
        radii = [scale / (n + 2) for n in range(2**k - 1)]
    try:
        comb = rigid_comb(k, radii)
    except ValueError as e:
        raise SchemaError(f"invalid comb: {e}", {"depth": k}) from e
    V = functor_u(U, comb)
    contract = verify_comb_contract(U, comb, max_order)
    _write_output(space_to_file(V), args)
    payload = {"points": len(V), "contract": contract.model_dump(), "holds": contract.holds}
    _emit(payload, args, config)
    return EXIT_OK if contract.holds else EXIT_FAIL


def cmd_condense(args: argparse.Namespace, config: AppConfig) -> int:
    T = _tree_or_space(args.input, config)
    cond = condense(T, max_order=config.guards.max_order)
    sk = label_N(T, cond)
    _write_output(skeleton_to_file(sk), args)
    payload = {
        "skeleton": skeleton_to_file(sk).model_dump(mode="json"),
        "classes": {name: list(block) for name, block in cond.members.items()},
        "special": is_special(T, cond),
        "linear": sk.is_linear(),
    }
    _emit(payload, args, config)
    return EXIT_OK


def cmd_wreath(args: argparse.Namespace, config: AppConfig) -> int:
    max_order = config.guards.max_order
    kind, obj = load_input(args.skeleton)
    groups = None
    if isinstance(obj, Skeleton):
        bundle: Union[SkeletonBundle, ProjectionSystem] = SkeletonBundle(obj, args.supports)
    elif isinstance(obj, ProjectionSystem):
        bundle = obj
        model = validate_schema(read_json(args.skeleton), "system")
        _, groups = system_from_file(model, max_order)
    else:
        raise SchemaError(f"expected a skeleton or system file, found {kind}", {"kind": kind})
    ps = as_system(bundle, max_order)
    G = wreath_group(ps, groups or None, max_order)
    payload = _group_payload(G)
    payload["ground"] = [format_seq(ps.skeleton, z) for z in ps.ground]
    payload["full"] = is_full(ps, max_order)
    payload["locally_homogeneous"] = is_locally_homogeneous(ps, max_order)
    if args.brute:
        payload["brute_force_agrees"] = brute_wreath_oracle(ps, groups or None).same_elements(G)
    _emit(payload, args, config)
    return EXIT_OK


def cmd_rho(args: argparse.Namespace, config: AppConfig) -> int:
    ps = _load(args.input, "system")
    rewritten, mapping = rho(ps)
    witness = verify_rho(ps, None, config.guards.max_order)
    sk = rewritten.skeleton
    _write_output(system_to_file(ProjectionSystem.trivial(rewritten)), args)
    payload = {
        "rho": {format_seq(sk, z): format_seq(sk, w) for z, w in mapping.items()},
        "finite_character": has_finite_character(ps),
        "witness": WitnessRecord.from_witness("Wr^{S,π} ≅ Wr^{ρ(S)}", witness).model_dump(),
    }
    _emit(payload, args, config)
    return EXIT_OK if witness.verified else EXIT_FAIL


def cmd_treeify(args: argparse.Namespace, config: AppConfig) -> int:
    ps = _load(args.input, "system")
    k = config.guards.depth or len(ps.skeleton) + 2
    built = tree_from_wreath(ps, k, None, config.guards.max_order)
    _write_output(tree_to_file(built.tree), args)
    payload = {
        "depth": k,
        "nodes": len(built.tree),
        "witness": WitnessRecord.from_witness("Aut*(P) ≅ Aut(T_P)", built.witness).model_dump(),
    }
    _emit(payload, args, config)
    return EXIT_OK if built.witness.verified else EXIT_FAIL


def cmd_urysohn(args: argparse.Namespace, config: AppConfig) -> int:
    U = _load(args.input, "space")
    report = urysohn_diagnostics(U, config.guards.wide_bound, config.guards.max_order)
    _emit(report, args, config)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace, config: AppConfig) -> int:
    max_order = config.guards.max_order
    timings = config.output.include_timings
    name = args.name
    kind, obj = load_input(args.input)
    report: TheoremReport
    if name in ("homogeneous", "discrete"):
        if not isinstance(obj, UltraSpace):
            raise SchemaError(f"pipeline {name} needs a space file", {"kind": kind})
        run = verify_homogeneous if name == "homogeneous" else verify_discrete_homogeneous
        report = run(obj, max_order, timings)
    elif name == "general":
        if not isinstance(obj, (UltraSpace, LTree)):
            raise SchemaError("pipeline general needs a space or tree file", {"kind": kind})
        report = verify_general(obj, max_order, timings)
    elif name == "exact":
        if not isinstance(obj, (UltraSpace, LTree)):
            raise SchemaError("pipeline exact needs a space or tree file", {"kind": kind})
        report = verify_exact(obj, config.guards.depth or 1, max_order, timings)
    else:
        if isinstance(obj, Skeleton):
            obj = SkeletonBundle(obj)
        if not isinstance(obj, (SkeletonBundle, ProjectionSystem)):
            raise SchemaError("pipeline roundtrip needs a skeleton or system file", {"kind": kind})
        report = roundtrip_wreath(
            obj, config.guards.depth, args.pad_below, args.pad_above, max_order, timings
        )
    _emit(report, args, config)
    return EXIT_FAIL if report.verdict == "FAIL" else EXIT_OK


def cmd_corpus(args: argparse.Namespace, config: AppConfig) -> int:
    spaces = generate_corpus(config.corpus)
    batch = run_corpus(spaces, config.corpus, config.guards.workers, config.guards.max_order)
    if getattr(args, "output", None):
        corpus_file = {
            "seed": config.corpus.seed,
            "spaces": [space_to_file(U).model_dump(mode="json") for U in spaces],
        }
        Path(args.output).write_text(dump_json(corpus_file), encoding="utf-8")
    _emit(batch, args, config)
    return EXIT_FAIL if batch.verdicts.get("FAIL") else EXIT_OK


# Parser


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", help="Write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), help="Report format")
    common.add_argument("--max-order", type=int, help="Group enumeration guard")
    common.add_argument("--depth", type=int, help="Truncation or padding depth k")
    common.add_argument("--wide-bound", type=int, help="Bound m for wideness checks")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    return common


def _input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", "--space", "--tree", dest="input", required=True, help="Input file")


def _output(p: argparse.ArgumentParser, text: str) -> None:
    p.add_argument("--output", "--out", dest="output", help=text)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="ultrametric-wreath",
        description="Ultrametric spaces, L-trees and wreath products with verified witnesses",
    )
    parser.add_argument("--version", action="version", version=f"ultrametric-wreath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="Validate an input file")
    _input(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("iso", parents=[common], help="Isometry group of a space")
    _input(p)
    p.add_argument("--brute", action="store_true", help="Cross-check against brute force")
    p.set_defaults(func=cmd_iso)

    p = sub.add_parser("aut", parents=[common], help="Automorphism group of a tree (or F(U))")
    _input(p)
    p.set_defaults(func=cmd_aut)

    p = sub.add_parser("functor", parents=[common], help="Apply F, G or U")
    p.add_argument("which", choices=("f", "g", "u"))
    _input(p)
    _output(p, "Write the constructed object here")
    p.add_argument("--levels", help="Comma-separated level set for F")
    p.add_argument("--embedding", help="Level embedding file for G")
    p.add_argument("--radii", help="Comma-separated decreasing comb radii for U, e.g. 1/2,1/3,1/4")
    p.set_defaults(func=cmd_functor)

    p = sub.add_parser("condense", parents=[common], help="Condensed skeleton of a tree")
    _input(p)
    _output(p, "Write the skeleton here")
    p.set_defaults(func=cmd_condense)

    p = sub.add_parser("wreath", parents=[common], help="Generalized wreath product")
    p.add_argument(
        "--skeleton",
        "--system",
        "--input",
        dest="skeleton",
        required=True,
        help="Skeleton or projection system file",
    )
    p.add_argument("--supports", choices=SUPPORT_TAGS, default="lf")
    p.add_argument("--brute", action="store_true", help="Cross-check against brute force")
    p.set_defaults(func=cmd_wreath)

    p = sub.add_parser("rho", parents=[common], help="Rewrite a projection system as a family")
    _input(p)
    _output(p, "Write the rewritten system here")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("treeify", parents=[common], help="Truncated tree of a projection system")
    _input(p)
    _output(p, "Write the tree here")
    p.set_defaults(func=cmd_treeify)

    p = sub.add_parser("urysohn", parents=[common], help="Wideness and quasi-maximality")
    _input(p)
    p.set_defaults(func=cmd_urysohn)

    p = sub.add_parser("pipeline", parents=[common], help="Run an end-to-end verifier")
    p.add_argument("name", choices=PIPELINES)
    _input(p)
    p.add_argument("--pad-below", type=int, default=0, help="Bottom padding for roundtrip")
    p.add_argument("--pad-above", type=int, default=0, help="Top padding for roundtrip")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("corpus", parents=[common], help="Random corpus through verify_general")
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--max-points", type=int)
    p.add_argument("--workers", type=int)
    _output(p, "Write the generated spaces here")
    p.set_defaults(func=cmd_corpus)
    return parser


def apply_overrides(config: AppConfig, args: argparse.Namespace) -> AppConfig:
    """Return a new config with command-line flags layered over the environment.

    Raises:
        ValueError: If an override fails validation.
    """

    def pick(flag: str, current: Any) -> Any:
        value = getattr(args, flag, None)
        return current if value is None else value

    try:
        return AppConfig(
            guards=GuardConfig(
                max_order=pick("max_order", config.guards.max_order),
                depth=pick("depth", config.guards.depth),
                wide_bound=pick("wide_bound", config.guards.wide_bound),
                workers=pick("workers", config.guards.workers),
            ),
            output=OutputConfig(
                format=pick("format", config.output.format),
                include_timings=config.output.include_timings,
            ),
            corpus=CorpusConfig(
                seed=pick("seed", config.corpus.seed),
                count=pick("count", config.corpus.count),
                max_points=pick("max_points", config.corpus.max_points),
            ),
            log_level=config.log_level,
        )
    except ValidationError as e:
        raise ValueError(f"Configuration validation failed: {e}") from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, load configuration and dispatch; returns the exit code."""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = apply_overrides(load_config(), args)
    except ValueError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    level = config.log_level
    if args.verbose == 1:
        level = "INFO"
    elif args.verbose > 1:
        level = "DEBUG"
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )

    func: Callable[[argparse.Namespace, AppConfig], int] = args.func
    try:
        return func(args, config)
    except UltrametricWreathError as e:
        logger.debug(f"{type(e).__name__} details: {e.details}")
        print(f"error: {type(e).__name__}: {e.message}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
