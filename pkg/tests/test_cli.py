import json

import pytest

from callias import cli


def run(capsys, *args):
    code = cli.main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_index_hedgehog(capsys):
    code, out, _ = run(capsys, "index", "--potential", "hedgehog")
    assert code == 0 and "index: -1.000000000000" in out


def test_index_block_note(capsys):
    code, out, _ = run(capsys, "index", "--potential", "block:hedgehog,l=2")
    assert code == 0
    assert "generalized Witten (non-Fredholm embedding)" in out


def test_index_json_lines_schema_and_tolerances(capsys):
    code, out, _ = run(capsys, "index", "--potential", "constant", "--format", "json-lines")
    recs = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and all(r["schema"] == 1 for r in recs)
    assert all("tolerance" in r for r in recs)
    assert recs[-1]["index"] == 0.0


def test_json_lines_deterministic(capsys, monkeypatch):
    args = ("index", "--potential", "anti_hedgehog", "--format", "json-lines", "--radii", "2,3,5")
    first = run(capsys, *args)[1]
    monkeypatch.setenv("CALLIAS_THREADS", "1")
    assert run(capsys, *args)[1] == first


def test_csv_output(capsys):
    code, out, _ = run(capsys, "index", "--potential", "hedgehog", "--format", "csv")
    assert out.splitlines()[0] == "radius,re,im"


def test_out_file(capsys, tmp_path):
    path = tmp_path / "o.txt"
    code, out, _ = run(capsys, "index", "--potential", "hedgehog", "--out", str(path))
    assert code == 0 and out == "" and "index:" in path.read_text()


def test_potential_file(capsys, tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("name = anti_hedgehog\n")
    code, out, _ = run(capsys, "index", "--potential", str(path))
    assert code == 0 and "index: +1.0" in out


@pytest.mark.parametrize("args", [
    ("index", "--potential", "nope"),
    ("index", "--potential", "hedgehog", "--degree", "5"),
    ("index", "--potential", "hedgehog", "--format", "xml"),
    ("index", "--potential", "hedgehog", "--radii", ""),
    ("index", "--potential", "hedgehog", "--d", "4"),
    ("index", "--potential", "hedgehog:n"),
    ("index",),
    ("frobnicate",),
    ("verify", "nosuch"),
    ("witten", "--potential", "hedgehog", "--level", "9"),
])
def test_usage_errors_exit_one(capsys, args):
    assert run(capsys, *args)[0] == 1


def test_bad_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("CALLIAS_THREADS", "zero")
    code = run(capsys, "witten", "--potential", "hedgehog", "--level", "0")[0]
    assert code == 1


def test_non_convergent_exit_two(capsys, tmp_path):
    # anisotropic non-unitary table: the surface values keep moving with the radius
    path = tmp_path / "drift.txt"
    path.write_text("n = 3\nd = 2\nentry 1 1 = x3/r\nentry 2 2 = -x3/r\n"
                    "entry 1 2 = (1 + 3*exp(-r/2))*(x1 - 1j*x2)/r\n"
                    "entry 2 1 = (1 + 3*exp(-r/2))*(x1 + 1j*x2)/r\n")
    code, out, _ = run(capsys, "index", "--potential", str(path), "--radii", "1,2,4")
    assert code == 2 and "converged: False" in out


def test_verify_clifford(capsys):
    code, out, _ = run(capsys, "verify", "clifford", "--n", "7")
    assert code == 0 and out.strip().endswith("suite clifford: pass")


def test_verify_sign_json(capsys):
    code, out, _ = run(capsys, "verify", "sign", "--format", "json-lines")
    recs = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and all(r["status"] == "pass" and "tolerance" in r for r in recs)


def test_verify_counterexample_reports_failure(capsys):
    code, out, _ = run(capsys, "verify", "counterexample", "--kmax", "40")
    assert code == 3
    assert "S_40" in out and "shell derivative" in out


def test_witten_constant_level_zero(capsys):
    code, out, _ = run(capsys, "witten", "--potential", "constant", "--level", "0", "--z", "0.5,1",
                       "--format", "json-lines")
    recs = [json.loads(line) for line in out.splitlines()]
    assert code == 0
    assert all(r["re"] == 0 for r in recs if r["kind"] == "witten.trace")
    assert all(r["schema"] == 1 for r in recs)
