import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from grouplinear.cli import main, parse_range


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def test_parse_range():
    assert parse_range("20:100:20") == [20, 40, 60, 80, 100]
    assert parse_range("50") == [50]
    assert parse_range("10,30") == [10, 30]
    assert len(parse_range("20:500:20")) == 25


def test_estimate_group_linear_hand_example(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text("x,v\n0,1\n1,1\n2,1\n3,1\n4,1\n")
    part = tmp_path / "part.json"
    code, out, _ = run(["estimate", "-i", str(src), "--method", "group-linear", "--binning", "log",
                        "--emit-partition", str(part)], capsys)
    assert code == 0
    rows = data_rows(out)
    assert list(rows[0]) == ["index", "x", "v", "estimate", "block", "b_hat"]
    np.testing.assert_allclose([float(r["estimate"]) for r in rows], [0.4, 1.2, 2.0, 2.8, 3.6])
    assert {r["block"] for r in rows} == {"0"}
    assert json.loads(part.read_text())["m"] == 1


def test_estimate_naive_via_stdin(capsys, monkeypatch):
    code, out, _ = run(["estimate", "--method", "naive"], capsys, "x,v\n1.5,2\n-3,0.5\n", monkeypatch)
    assert code == 0
    rows = data_rows(out)
    assert [r["estimate"] for r in rows] == ["1.5", "-3"]


def test_estimate_json(capsys, monkeypatch):
    code, out, _ = run(["estimate", "--method", "js", "--format", "json"], capsys,
                       "x,v\n0,1\n1,1\n2,1\n3,1\n4,1\n", monkeypatch)
    doc = json.loads(out)
    assert code == 0 and doc["rows"][0]["estimate"] == pytest.approx(0.4)
    assert doc["metadata"]["method"] == "js"


@pytest.mark.parametrize("body, fragment", [
    ("", "empty"),
    ("x,v\n", "no data rows"),
    ("x,v\n1,1\n2,0\n", "line 3"),
    ("x,v\n1,1\nfoo,1\n", "line 3"),
    ("a,b\n1,1\n", "header"),
])
def test_estimate_data_errors(body, fragment, capsys, monkeypatch):
    code, _, err = run(["estimate"], capsys, body, monkeypatch)
    assert code == 3
    assert fragment in err


def test_usage_errors(capsys):
    for argv in (["simulate", "--scenario", "q"], ["simulate", "--scenario", "a", "--method", "bogus"],
                 ["estimate", "--binning", "cubic"], ["frobnicate"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


def test_emit_partition_needs_grouped_method(tmp_path, capsys, monkeypatch):
    code, _, err = run(["estimate", "--method", "naive", "--emit-partition", str(tmp_path / "p.json")],
                       capsys, "x,v\n1,1\n", monkeypatch)
    assert code == 2


def test_curve_shape_and_determinism(tmp_path, capsys):
    argv = ["curve", "--scenario", "e", "--methods", "gl,sure-m,sure-sg", "--n", "20:100:20",
            "--reps", "3", "--seed", "1", "--oracle-mc", "2000"]
    code, first, _ = run(argv, capsys)
    code2, second, _ = run(argv, capsys)
    assert code == code2 == 0
    assert first == second
    rows = data_rows(first)
    assert len([r for r in rows if r["n"]]) == 15
    assert {r["method"] for r in rows if not r["n"]} == {"oracle-xkb", "oracle-linear"}
    assert "# seed=1" in first


def test_simulate_defaults_without_oracles(capsys):
    code, out, _ = run(["simulate", "--scenario", "a", "--method", "sure-m", "--n", "30", "--reps", "4"], capsys)
    rows = data_rows(out)
    assert code == 0 and len(rows) == 1 and rows[0]["method"] == "sure-m"


def test_simulate_json_to_file(tmp_path, capsys):
    target = tmp_path / "risk.json"
    code, out, _ = run(["simulate", "--scenario", "c", "--method", "naive", "--n", "25", "--reps", "5",
                        "--format", "json", "-o", str(target)], capsys)
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    assert doc["rows"][0]["N"] == 5 and doc["metadata"]["scenario"] == "c"


def test_baseball_naive_and_no_shuffles(batting_csv, capsys):
    code, out, _ = run(["baseball", "-i", str(batting_csv), "--methods", "naive", "--shuffles", "0"], capsys)
    assert code == 0
    rows = data_rows(out)
    assert list(rows[0]) == ["method", "all", "pitchers", "non-pitchers"]
    assert all(rows[0][k] == "1" for k in ("all", "pitchers", "non-pitchers"))


def test_baseball_subset_and_shuffles(batting_csv, capsys):
    code, out, _ = run(["baseball", "-i", str(batting_csv), "--methods", "gl,naive", "--subset", "all",
                        "--shuffles", "2", "--seed", "3"], capsys)
    rows = data_rows(out)
    assert code == 0 and list(rows[0]) == ["method", "all", "all (shuffled)"]
    assert "# shuffles=2" in out


def test_baseball_missing_file(tmp_path, capsys):
    code, _, err = run(["baseball", "-i", str(tmp_path / "nope.csv")], capsys)
    assert code == 3 and "no such file" in err


def test_module_entry_point(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("x,v\n1,1\n")
    proc = subprocess.run([sys.executable, "-m", "grouplinear", "estimate", "-i", str(src), "--method", "naive"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "index,x,v,estimate,block,b_hat" in proc.stdout
