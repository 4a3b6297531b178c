import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from rankcurve.cli import (
    EXIT_EMPTY,
    EXIT_ERROR,
    EXIT_OK,
    RunReport,
    emit_plot_script,
    read_branch_csv,
    run_command,
    write_branch,
)
from rankcurve.poly import parse_system
from rankcurve.tracer import Termination, TracedBranch, TraceStep

from conftest import CUBIC_WITNESSES


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def schema(request):
    from conftest import DATA
    return json.loads((DATA / "report.schema.json").read_text())


CUBIC_TRACE = ["trace", "--system", None, "--beta", "1e4", "--trace-beta", "1e8", "--points", "40",
               "--starts", "60", "--seed", "7", "--anchor", "0,-1", "--radius", "3", "--eps", "1e-2"]


def _cubic_trace_args(data_dir, out, *extra):
    args = list(CUBIC_TRACE)
    args[2] = data_dir / "cubic.sys"
    return args + ["--out", out, *extra]


def test_witness_command(data_dir, schema, tmp_path):
    code, text, _ = run("witness", "--system", data_dir / "cubic.sys", "--seed", "7", "--starts", "200",
                        "--anchor", "0,-1", "--radius", "3", "--eps", "1e-2", "--out", tmp_path)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, schema)
    xs = np.array([w["x"] for w in doc["witness_summary"]])
    for w in CUBIC_WITNESSES:
        assert np.abs(xs - w).max(axis=1).min() <= 5e-3
    assert "critical points" in text


def test_empty_command(data_dir, schema, tmp_path):
    code, text, _ = run("empty", "--system", data_dir / "positive_quartic.sys", "--anchor", "0.2,0.5,0.3",
                        "--out", tmp_path)
    assert code == EXIT_EMPTY
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, schema)
    assert doc["verdict"]["kind"] == "Empty"
    assert abs(doc["verdict"]["mu_bar_min"] - 28.6) <= 0.5
    assert doc["verdict"]["certified"] is False
    assert "Empty" in text


def test_refine_command(data_dir, schema, tmp_path):
    code, _, _ = run("refine", "--system", data_dir / "cubic.sys", "--starts", "100", "--anchor", "0,-1",
                     "--radius", "3", "--eps", "1e-2", "--target-beta", "1e8", "--out", tmp_path, "--quiet")
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, schema)
    assert doc["refined"] and all(r["status"] == "ok" for r in doc["refined"])
    for r in doc["refined"]:
        x1, x2 = r["x"]
        assert abs(x1 ** 3 - x2) <= 2e-3


def test_trace_command_outputs(data_dir, schema, tmp_path):
    code, _, _ = run(*_cubic_trace_args(data_dir, tmp_path, "--format", "csv", "--emit-plot", "--quiet"))
    assert code == EXIT_OK
    for name in ("branch_0.csv", "companion_0.csv", "report.json", "timings.json", "plot.gp"):
        assert (tmp_path / name).exists()
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, schema)
    assert doc["branches"]
    rows = read_branch_csv(tmp_path / "branch_0.csv")
    assert rows.shape == (doc["branches"][0]["n_points"], 3)
    assert np.array_equal(rows[:, :2], np.array(doc["branches"][0]["curve_points"]))
    header = (tmp_path / "branch_0.csv").read_text().splitlines()[0]
    assert header == "idx,x1,x2,residual"
    assert (tmp_path / "companion_0.csv").read_text().splitlines()[0] == "idx,x1,x2"
    script = (tmp_path / "plot.gp").read_text()
    assert "plot 'branch_0.csv'" in script and "'companion_0.csv'" in script and "2:3 " in script
    assert "splot" not in script
    timings = json.loads((tmp_path / "timings.json").read_text())
    assert "trace_ms" in timings


@pytest.mark.property
def test_replay_is_byte_identical(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(*_cubic_trace_args(data_dir, d, "--format", "csv", "--quiet"))[0] == EXIT_OK
    for name in ("report.json", "branch_0.csv", "companion_0.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.property
def test_replay_across_processes(data_dir, tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / f"p{i}"
        subprocess.run([sys.executable, "-m", "rankcurve.cli", *map(str, _cubic_trace_args(data_dir, d, "--quiet"))],
                       check=True)
        outs.append((d / "report.json").read_bytes())
    assert outs[0] == outs[1]


def test_stdout_report_without_out(data_dir):
    code, text, _ = run("empty", "--system", data_dir / "positive_quartic.sys", "--anchor", "0.2,0.5,0.3",
                        "--starts", "50")
    assert code == EXIT_EMPTY
    doc = json.loads(text[text.index("{"):])
    assert doc["command"] == "empty"


@pytest.mark.parametrize("argv", [
    ["witness", "--system", "does/not/exist.sys"],
    ["witness", "--system", "{bad}", "--lambda", "2"],
    ["trace", "--system", "{cubic}", "--lambda", "2"],
    ["trace", "--system", "{cubic}", "--anchor", "1,2,3"],
    ["nonsense"],
])
def test_error_exit_codes(data_dir, tmp_path, argv):
    bad = tmp_path / "bad.sys"
    bad.write_text("vars: x\nx ** 2\n")
    argv = [a.format(bad=bad, cubic=data_dir / "cubic.sys") for a in argv]
    code, _, err = run(*argv)
    assert code == EXIT_ERROR
    if argv[0] != "nonsense":
        assert err.startswith("rankcurve: error:")
        assert len(err.strip().splitlines()) == 1


def test_parse_error_names_location(tmp_path):
    bad = tmp_path / "bad.sys"
    bad.write_text("vars: x y\nx + y\nx * * y\n")
    code, _, err = run("witness", "--system", bad)
    assert code == EXIT_ERROR
    assert "line 3" in err


def _branch(points):
    pts = [np.asarray(p, dtype=float) for p in points]
    steps = [TraceStep(p, p + 0.5, 1.0, 1.0, 0, 1e-7 * i) for i, p in enumerate(pts)]
    return TracedBranch(pts, [p + 0.5 for p in pts], None, Termination.BUDGET_REACHED, steps)


def test_csv_round_trip(tmp_path):
    pts = [[0.1, -1 / 3], [np.pi, 1e-300], [-2.5e17, 7.0]]
    path = tmp_path / "branch_0.csv"
    written = write_branch(_branch(pts), "csv", path)
    assert written == [path, tmp_path / "companion_0.csv"]
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    rows = read_branch_csv(path)
    assert np.array_equal(rows[:, :2], np.array(pts))
    comp = read_branch_csv(tmp_path / "companion_0.csv")
    assert np.array_equal(comp, np.array(pts) + 0.5)


def test_empty_branch_csv(tmp_path):
    path = tmp_path / "branch_0.csv"
    write_branch(_branch([]), "csv", path, n_vars=3)
    assert path.read_text() == "idx,x1,x2,x3,residual\n"
    assert read_branch_csv(path).shape == (0, 4)


def test_branch_json(tmp_path):
    path = tmp_path / "b.json"
    write_branch(_branch([[1.0, 2.0]]), "json", path)
    doc = json.loads(path.read_text())
    assert doc["curve_points"] == [[1.0, 2.0]]
    with pytest.raises(ValueError):
        write_branch(_branch([]), "xml", path)


def test_plot_script_variants(tmp_path):
    rep = RunReport("trace", "x.sys", {}, branches=[{"index": 0}, {"index": 1}])
    p = emit_plot_script(rep, tmp_path / "plot.gp", 4)
    text = p.read_text()
    assert text.count("splot") == 1 and "2:3:4" in text and "branch_1.csv" in text
    assert emit_plot_script(RunReport("trace", "x.sys", {}), tmp_path / "none.gp", 2) is None
    assert not (tmp_path / "none.gp").exists()


def test_no_branch_plot_notice(data_dir, tmp_path):
    code, text, _ = run("trace", "--system", data_dir / "positive_quartic.sys", "--starts", "50",
                        "--emit-plot", "--out", tmp_path)
    assert code == EXIT_EMPTY
    assert "plot script skipped" in text
    assert not (tmp_path / "plot.gp").exists()


def test_report_is_strict_json():
    rep = RunReport("witness", "s.sys", {"beta": float("inf")}, witness_summary=[{"x": [float("nan")]}])
    doc = rep.to_json()
    json.dumps(doc, allow_nan=False)
    assert doc["config_echo"]["beta"] is None


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "rankcurve.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("witness", "empty", "refine", "trace"):
        assert cmd in proc.stdout
