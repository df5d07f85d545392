import json

import pytest
from click.testing import CliRunner

from gasflow.cli import main

from test_bench import REVERSE, STATION, TREE

LOOP = """gasflow-instance 1
node s pressure 100
node a injection 0
node b injection -3
pipe s a 1
pipe a b 1
pipe s b 1
"""

OVERLOADED = """gasflow-instance 1
node s pressure 10
node d injection -5
pipe s d 1
"""


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def go(*args, files=None):
        for name, text in (files or {}).items():
            (tmp_path / name).write_text(text)
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    return go


@pytest.mark.parametrize("solver", ["miqcqp", "nr", "energy-c", "energy-u"])
def test_solve_tree(run, tmp_path, solver):
    out = tmp_path / "sol.json"
    res = run("solve", tmp_path / "t.gfi", "--solver", solver, "--out", out, files={"t.gfi": TREE})
    assert res.exit_code == 0, res.output
    data = json.loads(out.read_text())
    assert len(data["phi"]) == 2 and data["edges"][0]["phi"] == pytest.approx(3.0, abs=1e-6)


def test_solve_warm_start(run, tmp_path):
    sol = tmp_path / "sol.json"
    run("solve", tmp_path / "t.gfi", "--solver", "miqcqp", "--out", sol, files={"t.gfi": TREE})
    res = run("solve", tmp_path / "t.gfi", "--solver", "nr", "--warm-start", sol, "--quiet")
    assert res.exit_code == 0 and res.output.startswith("converged")


@pytest.mark.parametrize("text, solver, code", [
    (REVERSE, "miqcqp", 2),
    (REVERSE, "nr", 2),
    (OVERLOADED, "miqcqp", 2),
    (OVERLOADED, "energy-c", 2),
    (STATION, "energy-c", 4),
])
def test_solve_exit_codes(run, tmp_path, text, solver, code):
    res = run("solve", tmp_path / "x.gfi", "--solver", solver, files={"x.gfi": text})
    assert res.exit_code == code, res.output


def test_solve_nr_failure(run, tmp_path):
    res = run("solve", tmp_path / "l.gfi", "--solver", "nr", "--max-iter", 1, "--tol", 1e-14,
              files={"l.gfi": LOOP})
    assert res.exit_code == 3


def test_bad_inputs(run, tmp_path):
    assert run("solve", tmp_path / "missing.gfi").exit_code == 4
    res = run("solve", tmp_path / "b.gfi", files={"b.gfi": "gasflow-instance 1\nfoo\n"})
    assert res.exit_code == 4 and "b.gfi:2" in res.output
    assert run("solve", "builtin:nope").exit_code == 4
    assert run("solve", tmp_path / "t.gfi", "--solver", "nr", "--mu", 2,
               files={"t.gfi": TREE}).exit_code == 4


def test_check_builtin(run):
    res = run("check", "builtin:belgian")
    assert res.exit_code == 0
    assert "every edge on at most one cycle: NO" in res.output
    assert "20 nodes" in res.output


def test_check_with_solution(run, tmp_path):
    sol = tmp_path / "s.json"
    run("solve", tmp_path / "p.gfi", "--solver", "miqcqp", "--out", sol, files={"p.gfi": STATION})
    res = run("check", tmp_path / "p.gfi", "--solution", sol)
    assert res.exit_code == 0 and "guarantee" in res.output


def test_generate_and_bench(run, tmp_path):
    gen = tmp_path / "gen"
    res = run("generate", "belgian", "--count", 2, "--seed", 4, "--out-dir", gen)
    assert res.exit_code == 0
    files = sorted(p.name for p in gen.glob("*.gfi"))
    assert files == ["belgian_s4_0000.gfi", "belgian_s4_0001.gfi"]
    (gen / "zz_broken.gfi").write_text("nonsense\n")
    report = tmp_path / "rep.csv"
    res = run("bench", "--dir", gen, "--solvers", "a1,a3", "--report", report, "--jobs", 1)
    assert res.exit_code == 0, res.output
    data = json.loads(report.with_suffix(".json").read_text())
    status = {(r["instance"], r["solver"]): r["status"] for r in data["rows"]}
    assert status[("belgian_s4_0000", "a1")] == "optimal"
    assert status[("zz_broken", "a1")] == "error"
    assert run("bench", "--dir", gen, "--solvers", "zz", "--report", report).exit_code == 4
