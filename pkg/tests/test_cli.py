import io
import json
import subprocess
import sys

import pytest

from spaceable import cli
from spaceable import lpfun as lf
from spaceable import sequences as sq
from spaceable import spaceability as sp


def call(*argv):
    out = io.StringIO()
    code = cli.run(list(argv), out)
    return code, json.loads(out.getvalue())


def strip(doc):
    doc = dict(doc)
    doc.pop("timestamp", None)
    return doc


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_witness_then_certify_below_p(tmp_path):
    code, desc = call("witness", "seq", "--p", "1/1")
    assert code == 0 and desc["type"] == "sequence"
    code, rep = call("certify", "--in", write(tmp_path, "w.json", desc), "--q", "1/2")
    cert = rep["verdict"]["certificate"]
    assert code == 0 and rep["verdict"]["verdict"] == "diverges"
    assert cert["block"] == 2 and cert["exponent"] == "1/1"
    assert rep["certificate_valid"] is True


def test_pipe_through_stdin():
    w = subprocess.run([sys.executable, "-m", "spaceable", "witness", "seq", "--p", "1/1"], capture_output=True, text=True, check=True)
    c = subprocess.run(
        [sys.executable, "-m", "spaceable", "certify", "--q", "1/2"], input=w.stdout, capture_output=True, text=True
    )
    assert c.returncode == 0
    assert json.loads(c.stdout)["verdict"]["certificate"]["block"] == 2


def test_zero_sequence_converges_to_zero(tmp_path):
    path = write(tmp_path, "z.json", sq.zero_sequence(1).to_json())
    for q in ("1/3", "1/1", "7/2"):
        code, rep = call("certify", "--in", path, "--q", q)
        assert code == 0 and rep["verdict"]["verdict"] == "converges"
        assert rep["verdict"]["bound"] == "0/1"


def test_aleph0_ladder():
    code, rep = call("obstruct", "--kind", "aleph0", "--p", "1/1")
    assert code == 0
    assert rep["report"]["ladder"] == [f"1/{2**k}" for k in range(1, 11)]


def test_example12_requires_n():
    code, rep = call("obstruct", "--kind", "example12", "--p", "1/1")
    assert code == 1 and "error" in rep
    code, rep = call("obstruct", "--kind", "example12", "--p", "1/1", "--n", "2")
    assert code == 0


def test_function_witness_certify(tmp_path):
    code, desc = call("witness", "fun", "--p", "2/1")
    assert code == 0 and desc["type"] == "function"
    path = write(tmp_path, "f.json", desc)
    code, rep = call("certify", "--in", path, "--q", "2/1")
    assert code == 0 and rep["verdict"]["bound"] == "1/3"
    code, rep = call("certify", "--in", path, "--q", "3/1")
    assert code == 0 and rep["verdict"]["verdict"] == "diverges"


def test_numeric_evidence_exit_code(tmp_path):
    f = lf.add_functions(lf.fn_witness(1), lf.power_piece(1, "1/2", 1, 0, "1/2"))
    code, rep = call("certify", "--in", write(tmp_path, "m.json", f.to_json()), "--q", "5/2", "--threshold", "50/1")
    assert code == 2 and rep["verdict"]["verdict"] == "numeric_evidence"


@pytest.mark.parametrize(
    "argv, code",
    [
        (["witness", "seq", "--p", "abc"], "malformed_rational"),
        (["witness", "seq", "--p", "0/1"], "malformed_rational"),
        (["witness", "seq", "--p", "1/0"], "malformed_rational"),
        (["certify", "--in", "/nonexistent/x.json", "--q", "1/2"], "io_error"),
    ],
)
def test_error_codes(argv, code):
    rc, rep = call(*argv)
    assert rc == 1 and rep["error"]["code"] == code


def test_schema_violation(tmp_path):
    rc, rep = call("certify", "--in", write(tmp_path, "bad.json", {"type": "sequence"}), "--q", "1/2")
    assert rc == 1 and rep["error"]["code"] == "schema_violation"
    (tmp_path / "junk.json").write_text("{not json")
    rc, rep = call("certify", "--in", str(tmp_path / "junk.json"), "--q", "1/2")
    assert rc == 1 and rep["error"]["code"] == "schema_violation"


def test_budget_exhaustion_code(tmp_path):
    y = sq.witness_vector(1)
    a = write(tmp_path, "a.json", y.to_json())
    b = write(tmp_path, "b.json", sq.linear_combination([2], [y]).to_json())
    rc, rep = call("construct", "--inputs", a, b, "--max-n", "8", "--sample", "1")
    assert rc == 1 and rep["error"]["code"] == "budget_exceeded"


def test_unknown_subcommand():
    assert cli.run(["frobnicate"], io.StringIO()) == 1


@pytest.fixture(scope="module")
def basis_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("basis")
    paths = []
    for i, s in enumerate(sp.witness_basis(1, 2)):
        path = d / f"x{i}.json"
        path.write_text(json.dumps(s.to_json()))
        paths.append(str(path))
    return paths


def test_construct_report(basis_files):
    rc, rep = call("construct", "--inputs", *basis_files, "--sample", "3", "--depth", "8", "--q", "1/2")
    assert rc == 0
    assert len(rep["samples"]) == 3
    for s in rep["samples"]:
        assert s["head_recovery"] and s["norm_bound"]
        assert s["verdict"]["verdict"] == "diverges"


def test_construct_is_deterministic_and_job_independent(basis_files):
    argv = ["construct", "--inputs", *basis_files, "--sample", "4", "--depth", "8", "--q", "1/2", "--seed", "5"]
    _, one = call(*argv)
    _, two = call(*argv, "--jobs", "3")
    for key in ("samples", "selection", "n0", "operator"):
        assert cli.dumps(one[key]) == cli.dumps(two[key])
    _, three = call(*argv)
    assert json.dumps(strip(one), sort_keys=True) == json.dumps(strip(three), sort_keys=True)


def test_opdemo_report():
    rc, rep = call("opdemo", "--p", "2/1", "--q", "1/1", "--samples", "5", "--masks", "4")
    assert rc == 0 and rep["noninjective"] is True
    assert [e["independent"] for e in rep["independence"]] == [True] * 4


DETERMINISM_CASES = [
    ["witness", "seq", "--p", "3/2"],
    ["witness", "fun", "--p", "1/2"],
    ["obstruct", "--kind", "aleph0", "--p", "1/2", "--depth", "4"],
    ["obstruct", "--kind", "example12", "--p", "1/1", "--n", "3"],
    ["opdemo", "--p", "1/1", "--q", "2/1", "--samples", "4", "--masks", "3"],
]


@pytest.mark.parametrize("argv", DETERMINISM_CASES)
def test_reports_are_deterministic(argv):
    a, b = call(*argv), call(*argv)
    assert a[0] == b[0]
    assert cli.dumps(strip(a[1])) == cli.dumps(strip(b[1]))


def test_report_query_reproduces_verdict(tmp_path):
    _, desc = call("witness", "seq", "--p", "3/2")
    _, rep = call("certify", "--in", write(tmp_path, "w.json", desc), "--q", "1/2")
    q = rep["query"]
    path = write(tmp_path, "again.json", q["descriptor"])
    _, again = call(
        "certify", "--in", path, "--q", q["q"], "--eps", q["eps"], "--max-terms", str(q["max_terms"]),
        "--threshold", q["threshold"], "--block-choice", q["block_choice"],
    )
    assert cli.dumps(strip(again)) == cli.dumps(strip(rep))


@pytest.mark.parametrize("kind", ["seq", "fun"])
@pytest.mark.parametrize("p", ["1/2", "1/1", "3/2", "2/1"])
def test_descriptor_round_trip_bytes(kind, p):
    _, desc = call("witness", kind, "--p", p)
    text = cli.dumps(desc)
    parsed = cli._parse_descriptor(json.loads(text))
    assert cli.dumps(parsed.to_json()) == text
