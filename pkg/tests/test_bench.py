import csv
import json
import math

import numpy as np
import pytest

from gasflow.bench import (CHECK_FAILED, SKIPPED, BenchmarkReport, BenchRow, run_benchmark,
                           run_instance)
from gasflow.instances import parse_instance

TREE = """gasflow-instance 1
meta seed 9
node s pressure 100
node a injection -2
node b injection -1
pipe s a 1
pipe a b 2
"""

REVERSE = """gasflow-instance 1
node s pressure 100
node d injection -3
compressor d s 1.5 1
"""

STATION = """gasflow-instance 1
node s pressure 100
node d injection -3
compressor s d 1.5 1
"""


def test_tree_all_solvers_agree():
    rows = run_instance("t", parse_instance(TREE), ["a1", "a2", "a3", "energy-c", "energy-u"])
    assert [r.solver for r in rows] == ["a1", "a2", "a3", "energy-c", "energy-u"]
    assert all(r.success for r in rows), [(r.solver, r.status, r.note) for r in rows]
    assert all(r.seed == "9" for r in rows)
    assert max(r.gap for r in rows) < 1e-6


def test_reverse_compressor():
    rows = {r.solver: r for r in run_instance("r", parse_instance(REVERSE), ["a1", "a2", "a3"])}
    assert rows["a1"].status == "infeasible"
    assert rows["a2"].status == CHECK_FAILED
    assert rows["a3"].status == SKIPPED


def test_energy_skipped_with_compressors():
    rows = run_instance("c", parse_instance(STATION), ["energy-c"])
    assert rows[0].status == SKIPPED and "compressor" in rows[0].note


def test_report_aggregates_and_files(tmp_path):
    insts = {"b": parse_instance(TREE), "a": parse_instance(STATION)}
    rep = run_benchmark(insts, ["a1", "a3"])
    assert [r.instance for r in rep.rows] == ["a", "a", "b", "b"]
    agg = {a["solver"]: a for a in rep.aggregates()}
    gaps = [r.gap for r in rep.for_solver("a1") if r.success]
    assert agg["a1"]["gap_max"] == max(gaps)
    assert agg["a1"]["gap_median"] == pytest.approx(float(np.median(gaps)))
    assert agg["a3"]["mean_iterations"] == pytest.approx(
        np.mean([r.iterations for r in rep.for_solver("a3") if r.success]))
    csv_path, json_path = rep.write(tmp_path / "out.csv")
    with open(csv_path) as fh:
        read = list(csv.DictReader(fh))
    assert len(read) == 4 and read[0]["solver"] == "a1"
    data = json.loads(json_path.read_text())
    assert len(data["rows"]) == 4 and {a["solver"] for a in data["aggregates"]} == {"a1", "a3"}
    assert "solver" in rep.table()


def test_empty_aggregates_are_nan():
    rep = BenchmarkReport([BenchRow("x", "", "a2", "diverged")])
    (agg,) = rep.aggregates()
    assert agg["succeeded"] == 0 and math.isnan(agg["gap_max"])


def test_unknown_solver_rejected():
    with pytest.raises(ValueError):
        run_benchmark([parse_instance(TREE)], ["a9"])


def test_parallel_matches_serial():
    insts = [parse_instance(TREE), parse_instance(STATION), parse_instance(REVERSE)]
    a = run_benchmark(insts, ["a1", "a2"], jobs=1)
    b = run_benchmark(insts, ["a1", "a2"], jobs=2)
    key = [(r.instance, r.solver, r.status, r.iterations) for r in a.rows]
    assert key == [(r.instance, r.solver, r.status, r.iterations) for r in b.rows]
