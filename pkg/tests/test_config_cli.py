"""Config parsing, serialisation, the JSON report and the command-line entry point."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from hammercert import cli
from hammercert.config import build_problem, load_config, parse_config, serialize_config
from hammercert.errors import ConfigError, ExpressionError
from hammercert.report import EXIT_ERROR, EXIT_NONE, EXIT_OK, num
from hammercert.solver import apply_T

MINIMAL = """
[problem]
name = minimal
[kernel]
preset = dirichlet_max
a = 0.25
b = 0.75
[nonlinearity]
f = t*u^2
f1 = t*u^2
f2 = t*u^2
[certify]
rho = 1, 50
limits = none
"""


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestConfig:
    @pytest.mark.parametrize("name", ["example1", "example2"])
    def test_round_trip(self, name):
        cfg = parse_config(cli.bundled_config_text(name))
        again = parse_config(serialize_config(cfg))
        assert again == cfg
        assert serialize_config(again) == serialize_config(cfg)
        # and the rebuilt problems agree as operators
        p1, p2 = build_problem(cfg), build_problem(again)
        u = lambda t: 1 + t * (1 - t)
        np.testing.assert_array_equal(apply_T(p1, u).values, apply_T(p2, u).values)

    def test_functional_syntax(self):
        text = MINIMAL.replace("[nonlinearity]", """[terms]
lower =
    delta | 1/4 | point(0.5)
    delta | 1/4 | stieltjes(0.25:1, 0.75:1; density=t)
upper =
    delta | 1/4 | point:0.5
    delta | 1/4 | stieltjes:1
[nonlinearity]""")
        cfg = parse_config(text)
        kinds = [(t.functional.kind, t.functional.tau, t.functional.atoms, t.functional.density)
                 for t in cfg.lower + cfg.upper]
        assert kinds == [("point", 0.5, (), None), ("stieltjes", None, ((0.25, 1.0), (0.75, 1.0)), "t"),
                         ("point", 0.5, (), None), ("stieltjes", None, (), "1")]
        assert parse_config(serialize_config(cfg)) == cfg

    @pytest.mark.parametrize("old,new,where", [
        ("f = t*u^2\n", "f = t*w^2\n", "[nonlinearity] f line"),
        ("rho = 1, 50", "rho = 1, -5", "[certify] rho line"),
        ("limits = none", "limits = maybe", "[certify] limits line"),
        ("preset = dirichlet_max\n", "", "[kernel]"),
        ("a = 0.25\n", "a = quarter\n", "[kernel] a line"),
    ])
    def test_errors_carry_location(self, old, new, where):
        with pytest.raises(ConfigError) as info:
            parse_config(MINIMAL.replace(old, new))
        assert where in str(info.value)

    def test_expression_error_type(self):
        with pytest.raises(ExpressionError):
            parse_config(MINIMAL.replace("f2 = t*u^2", "f2 = __import__('os')"))

    def test_bad_term_line(self):
        text = MINIMAL.replace("[nonlinearity]", "[terms]\nlower =\n    alpha | 1 | min_window\n[nonlinearity]")
        with pytest.raises(ConfigError, match="terms"):
            parse_config(text)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            build_problem(parse_config(MINIMAL.replace("dirichlet_max", "nope")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")


class TestCommands:
    def test_constants(self, capsys):
        code, out, _ = run(capsys, "constants", "example1")
        doc = json.loads(out)
        assert code == EXIT_OK
        c = doc["constants"]
        assert float(c["M1"][0][0]["value"]) == pytest.approx(43 / 1024, abs=1e-12)
        assert c["r(M2)"]["source"] == "spectral_radius"
        assert len(c["L1"]["eigenfunction"]["values"]) == 65

    def test_check_index(self, capsys):
        code, out, _ = run(capsys, "check-index", "example1", "--rho", "1,44")
        doc = json.loads(out)
        holds = {(c["kind"], float(c["rho"])): c["holds"] for c in doc["conditions"]}
        assert code == EXIT_OK
        assert holds[("I1", 1.0)] and holds[("I0", 44.0)] and not holds[("I0", 1.0)]

    def test_certify_examples(self, capsys):
        _, out1, _ = run(capsys, "certify", "example1")
        _, out2, _ = run(capsys, "certify", "example2")
        c1, c2 = json.loads(out1)["certificate"], json.loads(out2)["certificate"]
        assert (c1["pattern"], c1["solution_count"]) == ("S2", 1)
        assert (c2["pattern"], c2["solution_count"]) == ("EIG_13", 1)

    def test_certify_none_exit_code(self, capsys, tmp_path):
        cfg = tmp_path / "none.cfg"
        cfg.write_text(MINIMAL.replace("rho = 1, 50", "rho = 1"))
        code, out, _ = run(capsys, "certify", str(cfg))
        assert code == EXIT_NONE and json.loads(out)["certificate"]["pattern"] == "NONE"

    def test_empty_functional_families(self, capsys, tmp_path):
        cfg = tmp_path / "plain.cfg"
        cfg.write_text(MINIMAL)
        code, out, _ = run(capsys, "constants", str(cfg))
        c = json.loads(out)["constants"]
        assert code == EXIT_OK and c["M1"] == [] and c["M2"] == []
        assert c["r(M1)"]["value"] == "0"

    def test_config_error_exit_code(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(MINIMAL.replace("f = t*u^2", "f = t*u^^2"))
        code, _, err = run(capsys, "certify", str(cfg))
        payload = json.loads(err)
        assert code == EXIT_ERROR and payload["error"] == "ExpressionError"
        assert payload["module"] == "cli_and_config"

    def test_solve_writes_csv(self, capsys, tmp_path):
        code, out, _ = run(capsys, "solve", "example1", "--outdir", str(tmp_path))
        doc = json.loads(out)
        assert code == EXIT_OK and doc["solver"]["converged"] and doc["solver"]["cone_ok"]
        rows = list(csv.reader((tmp_path / "example1_solution.csv").open()))
        assert rows[0] == ["node", "value"] and len(rows) == 130
        assert float(rows[65][1]) > 0

    def test_solve_failure_exit_code(self, capsys, tmp_path):
        cfg = tmp_path / "div.cfg"
        text = cli.bundled_config_text("example2").replace("method = newton", "method = picard")
        cfg.write_text(text)
        code, out, _ = run(capsys, "solve", str(cfg), "--outdir", str(tmp_path))
        assert code == EXIT_NONE
        assert "does not contradict" in " ".join(json.loads(out)["solver"]["notes"])

    def test_report_deterministic(self, capsys, tmp_path):
        docs = []
        for i in range(2):
            path = tmp_path / f"r{i}.json"
            code, _, _ = run(capsys, "report", "example1", "--out", str(path))
            assert code == EXIT_OK
            doc = json.loads(path.read_text())
            doc.pop("timestamp")
            docs.append(json.dumps(doc, sort_keys=True))
        assert docs[0] == docs[1]
        full = json.loads(docs[0])
        for key in ("constants", "conditions", "certificate", "solver"):
            assert key in full

    def test_numbers_are_fifteen_digit_strings(self):
        assert num(1 / 3) == "0.333333333333333"
        assert num(float("inf")) == "inf"

    def test_rho_argument_validated(self):
        with pytest.raises(SystemExit):
            cli.main(["check-index", "example1", "--rho", "1,-2"])
