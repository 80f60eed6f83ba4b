"""Unit tests for ultrametric_wreath.cli module.

Every test runs ``main`` in-process with a cleared environment and checks the
exit code together with the report written to stdout or a file.
"""

import json
import os
from fractions import Fraction
from unittest.mock import patch

import pytest

from ultrametric_wreath.cli import build_parser, main
from ultrametric_wreath.serialization import skeleton_to_file, system_to_file
from ultrametric_wreath.skeleton import Skeleton
from ultrametric_wreath.wreath import SkeletonBundle, as_system

U1 = {
    "points": ["a", "b", "c", "d"],
    "dist": [[0, 1, 2, 2], [1, 0, 2, 2], [2, 2, 0, 1], [2, 2, 1, 0]],
}
U2 = {"points": ["a", "b", "c"], "dist": [[0, 1, 2], [1, 0, 2], [2, 2, 0]]}
BROKEN = {"points": ["a", "b", "c"], "dist": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}
UNTREEABLE = {
    "elements": ["a1", "a2"],
    "le": [],
    "N": {"a1": 2, "a2": 2},
    "levels": {"a1": "1", "a2": "1"},
}


def run(argv, capsys) -> tuple[int, str, str]:
    with patch.dict(os.environ, {}, clear=True):
        code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestParser:
    """Tests for build_parser()."""

    def test_subcommands(self):
        """Test that every subcommand parses with its required flags."""
        parser = build_parser()
        args = parser.parse_args(["pipeline", "general", "--input", "x.json"])
        assert args.name == "general"
        assert args.pad_below == 0

    def test_common_flags_after_subcommand(self):
        """Test that shared flags are accepted after the subcommand."""
        args = build_parser().parse_args(["iso", "--input", "x.json", "--max-order", "5", "-vv"])
        assert args.max_order == 5
        assert args.verbose == 2

    def test_unknown_pipeline(self):
        """Test that argparse rejects an unknown pipeline name."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["pipeline", "nope", "--input", "x.json"])

    def test_file_flag_aliases(self):
        """Test that --space, --tree and --system name the input and --out names the output."""
        parser = build_parser()
        args = parser.parse_args(["functor", "f", "--space", "u.json", "--out", "t.json"])
        assert (args.input, args.output) == ("u.json", "t.json")
        assert parser.parse_args(["aut", "--tree", "t.json"]).input == "t.json"
        assert parser.parse_args(["wreath", "--system", "s.json"]).skeleton == "s.json"

    def test_radii_flag(self):
        """Test that the functor subcommand keeps --radii as given."""
        args = build_parser().parse_args(["functor", "u", "--input", "u.json", "--radii", "1/2"])
        assert args.radii == "1/2"


class TestCommands:
    """Tests for the subcommands end to end."""

    def test_iso(self, write_json, capsys):
        """Test the isometry group report of the worked space."""
        code, out, _ = run(["iso", "--input", write_json("u1.json", U1), "--brute"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["order"] == 8
        assert payload["homogeneous"] is True
        assert payload["brute_force_agrees"] is True

    def test_validate_ok(self, write_json, capsys):
        """Test that a valid space exits 0."""
        code, out, _ = run(["validate", "--input", write_json("u1.json", U1)], capsys)
        assert code == 0
        assert json.loads(out)["ok"] is True

    def test_validate_violation(self, write_json, capsys):
        """Test that a strong-triangle violation exits 1 with the offending triple."""
        code, out, _ = run(["validate", "--input", write_json("bad.json", BROKEN)], capsys)
        report = json.loads(out)
        assert code == 1
        assert report["violations"][0]["axiom"] == "strong-triangle"

    def test_pipeline_general(self, write_json, capsys):
        """Test the general pipeline on the second worked space."""
        code, out, _ = run(["pipeline", "general", "--input", write_json("u2.json", U2)], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["verdict"] == "PASS"
        assert report["orders"]["wreath"] == 2

    def test_pipeline_diagnostic_exits_zero(self, write_json, capsys):
        """Test that a DIAGNOSTIC verdict is not a failure."""
        path = write_json("u2.json", U2)
        code, out, _ = run(["pipeline", "homogeneous", "--input", path], capsys)
        assert code == 0
        assert json.loads(out)["verdict"] == "DIAGNOSTIC"

    def test_text_format(self, write_json, capsys):
        """Test the text rendering of a pipeline report."""
        path = write_json("u1.json", U1)
        code, out, _ = run(["pipeline", "homogeneous", "--input", path, "--format", "text"], capsys)
        assert code == 0
        assert out.splitlines()[0] == "homogeneous: PASS"

    def test_report_file(self, write_json, tmp_path, capsys):
        """Test that --report writes the report instead of printing it."""
        target = tmp_path / "report.json"
        path = write_json("u1.json", U1)
        code, out, _ = run(["iso", "--input", path, "--report", str(target)], capsys)
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text(encoding="utf-8"))["order"] == 8

    def test_functor_f_then_aut(self, write_json, tmp_path, capsys):
        """Test that the tree written by F feeds the aut command."""
        tree_path = tmp_path / "tree.json"
        path = write_json("u1.json", U1)
        code, _, _ = run(["functor", "f", "--input", path, "--output", str(tree_path)], capsys)
        assert code == 0
        code, out, _ = run(["aut", "--input", str(tree_path)], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["order"] == 8
        assert payload["pruned"] is True

    def test_functor_f_explicit_levels(self, write_json, capsys):
        """Test that a level list without a level above max D fails with a library error."""
        path = write_json("u1.json", U1)
        code, _, err = run(["functor", "f", "--input", path, "--levels", "1,2"], capsys)
        assert code == 40
        assert "ConditionTwoViolated" in err

    def test_functor_u_with_radii(self, write_json, tmp_path, capsys):
        """Test point replacement by a depth-1 comb of radius 1/2 through the alias flags."""
        target = tmp_path / "u1xcomb.json"
        path = write_json("u1.json", U1)
        argv = ["functor", "u", "--space", path, "--depth", "1", "--radii", "1/2"]
        code, out, _ = run([*argv, "--out", str(target)], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["points"] == 8
        assert payload["contract"]["actual_order"] == 128
        assert payload["holds"] is True
        assert len(json.loads(target.read_text(encoding="utf-8"))["points"]) == 8

    def test_functor_u_depth_from_radii(self, write_json, capsys):
        """Test that three radii without --depth build a depth-2 comb."""
        path = write_json("u2.json", U2)
        code, out, _ = run(["functor", "u", "--input", path, "--radii", "1/2,1/3,1/4"], capsys)
        assert code == 0
        assert json.loads(out)["points"] == 12

    def test_validate_leveled_skeleton(self, write_json, chain221, capsys):
        """Test that a leveled chain skeleton validates as a tree."""
        path = write_json("sk.json", skeleton_to_file(chain221).model_dump(mode="json"))
        code, out, _ = run(["validate", "--input", path], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["kind"] == "skeleton"
        assert report["ok"] is True

    def test_validate_untreeable_skeleton(self, write_json, capsys):
        """Test that two maximal elements on one level are reported and exit 1."""
        code, out, _ = run(["validate", "--input", write_json("sk.json", UNTREEABLE)], capsys)
        report = json.loads(out)
        assert code == 1
        assert "common-upper-bound" in {v["axiom"] for v in report["violations"]}

    def test_roundtrip_untreeable_is_diagnostic(self, write_json, capsys):
        """Test that a round trip over an untreeable skeleton reports DIAGNOSTIC."""
        path = write_json("sk.json", UNTREEABLE)
        code, out, _ = run(["pipeline", "roundtrip", "--input", path, "--depth", "3"], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["verdict"] == "DIAGNOSTIC"
        assert "not an L-tree" in report["diagnostics"][0]

    def test_wreath_from_skeleton(self, write_json, chain221, capsys):
        """Test the product of the (2, 2, 1) chain."""
        path = write_json("sk.json", skeleton_to_file(chain221).model_dump(mode="json"))
        code, out, _ = run(["wreath", "--skeleton", path, "--brute"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["order"] == 8
        assert payload["brute_force_agrees"] is True
        assert payload["full"] is True

    def test_rho(self, write_json, w3, capsys):
        """Test the ρ rewriting of the twisted system."""
        path = write_json("w3.json", system_to_file(w3).model_dump(mode="json"))
        code, out, _ = run(["rho", "--input", path], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["rho"]["d1(0,0)"] == "d1(0,1)"
        assert payload["witness"]["verified"] is True

    def test_treeify(self, write_json, w3, capsys):
        """Test the truncated tree of the twisted system at depth 3."""
        path = write_json("w3.json", system_to_file(w3).model_dump(mode="json"))
        code, out, _ = run(["treeify", "--input", path, "--depth", "3"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["depth"] == 3
        assert payload["witness"]["target_order"] == 2

    def test_urysohn(self, write_json, capsys):
        """Test the wideness report of the worked space with m = 2."""
        path = write_json("u1.json", U1)
        code, out, _ = run(["urysohn", "--input", path, "--wide-bound", "2"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["skeleton_N"] == [2, 2, 1]
        assert payload["quasi_maximal"] is True

    def test_corpus(self, tmp_path, capsys):
        """Test a small corpus run and the written spaces."""
        target = tmp_path / "corpus.json"
        argv = ["corpus", "--count", "2", "--max-points", "3", "--output", str(target)]
        code, out, _ = run(argv, capsys)
        batch = json.loads(out)
        assert code == 0
        assert batch["count"] == 2
        assert len(json.loads(target.read_text(encoding="utf-8"))["spaces"]) == 2


class TestExitCodes:
    """Tests for error handling in main()."""

    def test_parse_error(self, tmp_path, capsys):
        """Test that malformed JSON exits 10."""
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        code, _, err = run(["iso", "--input", str(path)], capsys)
        assert code == 10
        assert err.startswith("error: ParseError:")

    def test_schema_error(self, write_json, capsys):
        """Test that an unrecognized document exits 11."""
        code, _, _ = run(["iso", "--input", write_json("x.json", {"foo": 1})], capsys)
        assert code == 11

    def test_order_guard(self, write_json, capsys):
        """Test that a tight guard exits 20."""
        path = write_json("u1.json", U1)
        code, _, err = run(["iso", "--input", path, "--max-order", "4"], capsys)
        assert code == 20
        assert "OrderGuardExceeded" in err

    def test_bad_override(self, write_json, capsys):
        """Test that an invalid flag value is a configuration error."""
        path = write_json("u1.json", U1)
        code, _, err = run(["iso", "--input", path, "--max-order", "0"], capsys)
        assert code == 3
        assert "configuration error" in err

    def test_bad_environment(self, write_json, capsys):
        """Test that a malformed environment variable is a configuration error."""
        path = write_json("u1.json", U1)
        with patch.dict(os.environ, {"UMW_MAX_ORDER": "lots"}, clear=True):
            code = main(["iso", "--input", path])
        assert code == 3
        assert "Invalid integer for UMW_MAX_ORDER" in capsys.readouterr().err

    def test_radii_too_large(self, write_json, capsys):
        """Test that a comb radius reaching min D exits 42."""
        path = write_json("u1.json", U1)
        argv = ["functor", "u", "--input", path, "--depth", "1", "--radii", "1"]
        code, _, err = run(argv, capsys)
        assert code == 42
        assert "RadiiTooLarge" in err

    def test_radii_count_mismatch(self, write_json, capsys):
        """Test that a depth-2 comb with one radius is a schema error."""
        path = write_json("u1.json", U1)
        argv = ["functor", "u", "--input", path, "--depth", "2", "--radii", "1/2"]
        code, _, err = run(argv, capsys)
        assert code == 11
        assert "needs 3 radii" in err

    def test_unparsable_radii(self, write_json, capsys):
        """Test that a non-rational radius is a schema error."""
        path = write_json("u1.json", U1)
        code, _, _ = run(["functor", "u", "--input", path, "--radii", "half"], capsys)
        assert code == 11

    def test_treeify_untreeable(self, write_json, capsys):
        """Test that T_P over an untreeable skeleton exits 55 instead of a traceback."""
        sk = Skeleton.build(
            ["a1", "a2"], [], {"a1": 2, "a2": 2}, {"a1": Fraction(1), "a2": Fraction(1)}
        )
        system = system_to_file(as_system(SkeletonBundle(sk))).model_dump(mode="json")
        code, _, err = run(["treeify", "--input", write_json("sys.json", system)], capsys)
        assert code == 55
        assert err.startswith("error: NotTreeable:")
