"""Benchmark harness: run solver approaches over instance batches.

Approaches:

``a1``
    MI-QCQP branch-and-bound followed by active-cycle recovery.
``a2``
    Newton-Raphson from the default initial point.
``a3``
    Newton-Raphson warm-started from the ``a1`` solution.
``energy-c`` / ``energy-u``
    The energy-minimization solvers (compressor-free, single reference only).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .energy import ConvergenceError, solve_constrained, solve_unconstrained
from .instances import Instance
from .miqcqp.bnb import OPTIMAL, solve_miqcqp
from .network import NetworkError
from .newton import NrOptions, solve_nr
from .physics import StateLayout, exactness_gap
from .recovery import RecoveryError, recover_full_solution

APPROACHES = ("a1", "a2", "a3")
ENERGY = ("energy-c", "energy-u")
SOLVERS = APPROACHES + ENERGY
GAP_THRESHOLD = 1e-3

# a1 outcomes besides the branch-and-bound statuses
RECOVERY_FAILED = "recovery-failed"
ERROR = "error"
SKIPPED = "skipped"
# NR outcomes besides the raw NR statuses
CONVERGED = "converged"
CHECK_FAILED = "feasibility-check-failed"


@dataclass
class BenchRow:
    """One solver run on one instance."""

    instance: str
    seed: str
    solver: str
    status: str
    gap: float = math.nan
    residual: float = math.nan
    iterations: int = 0
    seconds: float = 0.0
    note: str = ""

    @property
    def success(self) -> bool:
        return self.status in (OPTIMAL, CONVERGED, "solved")


@dataclass(frozen=True)
class BenchOptions:
    nr: NrOptions = field(default_factory=NrOptions)
    node_limit: int = 100_000


def _quantile(values, q):
    return float(np.quantile(values, q)) if len(values) else math.nan


@dataclass
class BenchmarkReport:
    """Per-instance rows plus aggregates recomputed from them."""

    rows: list[BenchRow] = field(default_factory=list)

    def solvers(self) -> list[str]:
        return list(dict.fromkeys(r.solver for r in self.rows))

    def for_solver(self, solver: str) -> list[BenchRow]:
        return [r for r in self.rows if r.solver == solver]

    def aggregates(self) -> list[dict]:
        out = []
        for s in self.solvers():
            rows = self.for_solver(s)
            ok = [r for r in rows if r.success]
            gaps = [r.gap for r in ok if math.isfinite(r.gap)]
            out.append({
                "solver": s,
                "instances": len(rows),
                "succeeded": len(ok),
                "gap_median": _quantile(gaps, 0.5),
                "gap_q90": _quantile(gaps, 0.9),
                "gap_max": max(gaps) if gaps else math.nan,
                "frac_gap_below_1e-3": (sum(g < GAP_THRESHOLD for g in gaps) / len(gaps)
                                        if gaps else math.nan),
                "median_seconds": _quantile([r.seconds for r in rows], 0.5),
                "mean_iterations": float(np.mean([r.iterations for r in ok])) if ok else math.nan,
            })
        return out

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in fields(BenchRow)]
        w.writerow(names)
        for r in self.rows:
            w.writerow([getattr(r, n) for n in names])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "aggregates": self.aggregates()}

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write rows as CSV to ``path`` and the summary as JSON beside it."""
        path = Path(path)
        path.write_text(self.csv_text())
        js = path.with_suffix(".json")
        js.write_text(json.dumps(self.summary(), indent=2, default=_jsonable))
        return path, js

    def table(self) -> str:
        lines = [f"{'solver':<9}{'n':>5}{'ok':>5}{'G<1e-3':>9}{'G max':>11}{'med s':>9}{'iters':>7}"]
        for a in self.aggregates():
            lines.append(f"{a['solver']:<9}{a['instances']:>5}{a['succeeded']:>5}"
                         f"{a['frac_gap_below_1e-3']:>9.3f}{a['gap_max']:>11.3g}"
                         f"{a['median_seconds']:>9.3f}{a['mean_iterations']:>7.1f}")
        return "\n".join(lines)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


def _ms(t0: float) -> float:
    return round(time.perf_counter() - t0, 3)


def _nr_row(row: BenchRow, net, res) -> BenchRow:
    row.iterations = res.iterations
    row.residual = res.residual
    row.seconds = round(res.seconds, 3)
    if res.converged and not res.feasible:
        row.status = CHECK_FAILED
        row.note = "negative pressure or reverse compressor flow"
    else:
        row.status = res.status
    if np.isfinite(res.psi).all():
        row.gap = exactness_gap(net, res.psi, res.phi)
    return row


def run_instance(inst_id: str, inst: Instance, solvers: Sequence[str],
                 options: BenchOptions | None = None) -> list[BenchRow]:
    """Run the selected solvers on one instance; failures become rows."""
    opts = options or BenchOptions()
    seed = inst.meta_value("seed", "") or ""
    rows: list[BenchRow] = []

    def row(solver):
        r = BenchRow(inst_id, seed, solver, ERROR)
        rows.append(r)
        return r

    try:
        net, spec = inst.build()
        bounds = inst.bounds(net, spec)
    except (NetworkError, ValueError) as exc:
        for s in solvers:
            row(s).note = str(exc)
        return rows

    a1_solution = None
    if "a1" in solvers or "a3" in solvers:
        r = row("a1") if "a1" in solvers else BenchRow(inst_id, seed, "a1", ERROR)
        t0 = time.perf_counter()
        try:
            res = solve_miqcqp(net, spec, bounds, node_limit=opts.node_limit)
            r.iterations = res.nodes
            r.status = res.status
            if res.status == OPTIMAL:
                sol = recover_full_solution(net, spec, res.phi, phi_bar=bounds.phi_bar)
                r.gap, r.residual = sol.gap, sol.residual
                if sol.feasible:
                    a1_solution = sol
                else:
                    r.status = CHECK_FAILED
        except RecoveryError as exc:
            r.status, r.note = RECOVERY_FAILED, str(exc)
        except Exception as exc:  # recorded, never aborts the batch
            r.note = f"{type(exc).__name__}: {exc}"
        r.seconds = _ms(t0)

    if "a2" in solvers:
        r = row("a2")
        try:
            _nr_row(r, net, solve_nr(net, spec, options=opts.nr))
        except Exception as exc:
            r.note = f"{type(exc).__name__}: {exc}"

    if "a3" in solvers:
        r = row("a3")
        if a1_solution is None:
            r.status, r.note = SKIPPED, "no a1 solution to warm-start from"
        else:
            try:
                y0 = StateLayout(net, spec).pack(a1_solution.phi, a1_solution.psi)
                _nr_row(r, net, solve_nr(net, spec, y0, options=opts.nr))
            except Exception as exc:
                r.note = f"{type(exc).__name__}: {exc}"

    for name, fn in zip(ENERGY, (solve_constrained, solve_unconstrained)):
        if name not in solvers:
            continue
        r = row(name)
        t0 = time.perf_counter()
        try:
            sol = fn(net, spec)
            r.status, r.gap, r.residual, r.iterations = sol.status, sol.gap, sol.residual, sol.iterations
        except NetworkError as exc:
            r.status, r.note = SKIPPED, str(exc)
        except ConvergenceError as exc:
            r.status, r.note = "not-converged", str(exc)
        except Exception as exc:
            r.note = f"{type(exc).__name__}: {exc}"
        r.seconds = _ms(t0)
    return rows


def _run_one(args):
    return run_instance(*args)


def run_benchmark(instances: Mapping[str, Instance] | Iterable[Instance],
                  solvers: Sequence[str] = APPROACHES, options: BenchOptions | None = None,
                  jobs: int | None = 1) -> BenchmarkReport:
    """Run ``solvers`` on every instance.

    ``instances`` maps ids to instances; a plain iterable is numbered in
    order. Rows are sorted by instance id whatever the completion order.
    ``jobs=None`` uses every available CPU.
    """
    unknown = set(solvers) - set(SOLVERS)
    if unknown:
        raise ValueError(f"unknown solvers {sorted(unknown)}; choose from {list(SOLVERS)}")
    if not isinstance(instances, Mapping):
        instances = {f"{k:04d}": inst for k, inst in enumerate(instances)}
    tasks = [(k, instances[k], tuple(solvers), options) for k in sorted(instances)]
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) <= 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    order = {s: i for i, s in enumerate(solvers)}
    report = BenchmarkReport()
    for rows in results:
        report.rows.extend(sorted(rows, key=lambda r: order.get(r.solver, len(order))))
    return report
