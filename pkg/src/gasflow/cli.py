"""Command-line interface.

Exit codes: 0 solved or valid, 2 infeasible, 3 solver failure, 4 input error.
An instance argument may be a file path or ``builtin:belgian`` /
``builtin:gaslib40``.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import bench as bench_mod
from .energy import ConvergenceError, solve_constrained, solve_unconstrained
from .generators import generate_belgian_style, generate_gaslib_style
from .instances import Instance, InstanceError, builtin_instance, load_instance, save_instance
from .miqcqp.bnb import INFEASIBLE, OPTIMAL, solve_miqcqp
from .miqcqp.conditions import certify_conditions
from .network import GfSolution, NetworkError
from .newton import NrOptions, solve_nr, to_solution
from .physics import StateLayout
from .recovery import RecoveryError, recover_full_solution
from .topology import fundamental_cycles, spanning_tree

EXIT_OK, EXIT_INFEASIBLE, EXIT_FAILURE, EXIT_INPUT = 0, 2, 3, 4
BUILTIN_PREFIX = "builtin:"


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def read_instance(arg: str) -> Instance:
    try:
        if arg.startswith(BUILTIN_PREFIX):
            return builtin_instance(arg[len(BUILTIN_PREFIX):])
        return load_instance(arg)
    except (InstanceError, KeyError, OSError) as exc:
        raise InputError(str(exc)) from None


def solution_to_json(net, sol: GfSolution) -> dict:
    """Plain-data view of a solution; ``phi`` and ``psi`` use internal indices."""
    nodes = [{"index": n.id, "name": n.label, "synthetic": n.synthetic, "psi": float(sol.psi[n.id]),
              "pressure_bar": math.sqrt(sol.psi[n.id]) if sol.psi[n.id] >= 0 else None,
              "q": float(sol.q[n.id])} for n in net.nodes]
    edges = [{"index": e.id, "kind": e.kind, "from": net.nodes[e.source].label,
              "to": net.nodes[e.target].label, "phi": float(sol.phi[e.id])} for e in net.edges]
    return {"solver": sol.solver, "status": sol.status, "feasible": sol.feasible,
            "residual": sol.residual, "gap": sol.gap, "iterations": sol.iterations,
            "seconds": sol.seconds, "phi": [float(v) for v in sol.phi],
            "psi": [float(v) for v in sol.psi], "nodes": nodes, "edges": edges}


def read_solution(path: str, net) -> tuple[np.ndarray, np.ndarray]:
    try:
        data = json.loads(Path(path).read_text())
        phi, psi = np.asarray(data["phi"], float), np.asarray(data["psi"], float)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a solution file ({exc})") from None
    if phi.shape != (net.P,) or psi.shape != (net.N,):
        raise InputError(f"{path}: solution does not match the instance size")
    return phi, psi


def _print_solution(net, sol: GfSolution) -> None:
    click.echo(f"solver {sol.solver}  status {sol.status}  residual {sol.residual:.3e}  "
               f"gap {sol.gap:.3e}  iterations {sol.iterations}  time {sol.seconds:.3f}s")
    click.echo(f"{'node':>8} {'psi [bar^2]':>14} {'p [bar]':>10} {'q':>11}")
    for n in net.nodes:
        if n.synthetic:
            continue
        p = f"{math.sqrt(sol.psi[n.id]):10.4f}" if sol.psi[n.id] >= 0 else f"{'n/a':>10}"
        click.echo(f"{n.label:>8} {sol.psi[n.id]:14.4f} {p} {sol.q[n.id]:11.4f}")
    click.echo(f"{'edge':>14} {'phi':>12}")
    for e in net.edges:
        if e.station is not None and e.is_pipe:
            continue
        arrow = "=>" if e.is_compressor else "->"
        label = f"{net.nodes[e.source].label}{arrow}{net.nodes[e.target].label}"
        click.echo(f"{label:>14} {sol.phi[e.id]:12.5f}")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Steady-state gas network flow solvers."""


@main.command()
@click.argument("instance")
@click.option("--solver", type=click.Choice(["energy-c", "energy-u", "miqcqp", "nr"]),
              default="miqcqp", show_default=True)
@click.option("--mu", type=float, default=1.0, show_default=True, help="NR step size.")
@click.option("--tol", type=float, default=1e-3, show_default=True, help="NR residual tolerance.")
@click.option("--max-iter", type=int, default=50, show_default=True, help="NR iteration cap.")
@click.option("--warm-start", type=click.Path(), help="Solution JSON used as the NR start.")
@click.option("--node-limit", type=int, default=100_000, show_default=True,
              help="Branch-and-bound node budget.")
@click.option("--out", type=click.Path(), help="Write the solution as JSON.")
@click.option("--quiet", is_flag=True, help="Print the status line only.")
def solve(instance, solver, mu, tol, max_iter, warm_start, node_limit, out, quiet):
    """Solve one INSTANCE."""
    inst = read_instance(instance)
    net, spec = inst.build()
    code = EXIT_OK
    if solver in ("energy-c", "energy-u"):
        fn = solve_constrained if solver == "energy-c" else solve_unconstrained
        try:
            sol = fn(net, spec)
        except NetworkError as exc:
            raise InputError(str(exc)) from None
        except ConvergenceError as exc:
            click.echo(f"solver failure: {exc}", err=True)
            sys.exit(EXIT_FAILURE)
        if not sol.feasible:
            code = EXIT_INFEASIBLE
    elif solver == "miqcqp":
        res = solve_miqcqp(net, spec, inst.bounds(net, spec), node_limit=node_limit)
        if res.status == INFEASIBLE:
            click.echo("infeasible: the relaxation has no feasible point")
            sys.exit(EXIT_INFEASIBLE)
        if res.status != OPTIMAL:
            click.echo(f"solver failure: branch-and-bound ended with status {res.status}", err=True)
            sys.exit(EXIT_FAILURE)
        try:
            sol = recover_full_solution(net, spec, res.phi, phi_bar=inst.bounds(net, spec).phi_bar)
        except RecoveryError as exc:
            basis = fundamental_cycles(net, spanning_tree(net, spec.reference))
            if basis.overlapping:
                click.echo(f"solver failure: {exc}", err=True)
                sys.exit(EXIT_FAILURE)
            click.echo(f"infeasible: no consistent flow on an active cycle ({exc})")
            sys.exit(EXIT_INFEASIBLE)
        sol.iterations = res.nodes
        sol.seconds += res.seconds
        if not sol.feasible:
            code = EXIT_INFEASIBLE
    else:
        y0 = None
        if warm_start:
            y0 = StateLayout(net, spec).pack(*read_solution(warm_start, net))
        try:
            opts = NrOptions(mu=mu, tol=tol, max_iter=max_iter)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        res = solve_nr(net, spec, y0, opts)
        sol = to_solution(net, spec, res)
        if not res.converged:
            code = EXIT_FAILURE
        elif not res.feasible:
            sol.status = "infeasible"
            code = EXIT_INFEASIBLE
    if quiet:
        click.echo(f"{sol.status} residual={sol.residual:.3e} gap={sol.gap:.3e}")
    else:
        _print_solution(net, sol)
    if out:
        Path(out).write_text(json.dumps(solution_to_json(net, sol), indent=2))
    sys.exit(code)


@main.command()
@click.argument("family", type=click.Choice(["belgian", "gaslib"]))
@click.option("--base", help="Base instance (default: the shipped analog).")
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def generate(family, base, count, seed, out_dir):
    """Write COUNT random instances of FAMILY to OUT_DIR."""
    if base is None:
        base = BUILTIN_PREFIX + ("belgian" if family == "belgian" else "gaslib40")
    inst = read_instance(base)
    gen = generate_belgian_style if family == "belgian" else generate_gaslib_style
    try:
        batch = gen(inst, count, seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, x in enumerate(batch):
        save_instance(x, out / f"{family}_s{seed}_{k:04d}.gfi")
    click.echo(f"wrote {len(batch)} instances to {out}")


@main.command("bench")
@click.option("--dir", "directory", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--solvers", default="a1,a2,a3", show_default=True,
              help=f"Comma-separated subset of {','.join(bench_mod.SOLVERS)}.")
@click.option("--report", type=click.Path(), required=True,
              help="CSV rows; a JSON summary is written beside it.")
@click.option("--jobs", type=int, default=None, help="Worker processes (default: all CPUs).")
@click.option("--node-limit", type=int, default=100_000, show_default=True)
def bench_cmd(directory, solvers, report, jobs, node_limit):
    """Run solver approaches on every *.gfi file in --dir."""
    chosen = [s.strip() for s in solvers.split(",") if s.strip()]
    bad = set(chosen) - set(bench_mod.SOLVERS)
    if bad or not chosen:
        raise InputError(f"unknown solvers {sorted(bad)}; choose from {list(bench_mod.SOLVERS)}")
    instances, broken = {}, {}
    for path in sorted(Path(directory).glob("*.gfi")):
        try:
            instances[path.stem] = load_instance(path)
        except InstanceError as exc:
            broken[path.stem] = str(exc)
    if not instances and not broken:
        raise InputError(f"no *.gfi files in {directory}")
    rep = bench_mod.run_benchmark(instances, chosen, bench_mod.BenchOptions(node_limit=node_limit),
                                  jobs=jobs)
    for stem, msg in broken.items():
        for s in chosen:
            rep.rows.append(bench_mod.BenchRow(stem, "", s, bench_mod.ERROR, note=msg))
    rep.rows.sort(key=lambda r: r.instance)
    csv_path, json_path = rep.write(report)
    click.echo(rep.table())
    click.echo(f"rows: {csv_path}  summary: {json_path}")


@main.command()
@click.argument("instance")
@click.option("--solution", type=click.Path(), help="Solution JSON to test for circulation.")
def check(instance, solution):
    """Validate INSTANCE and report the exactness conditions."""
    inst = read_instance(instance)
    net, spec = inst.build()
    phi = read_solution(solution, net)[0] if solution else None
    n_user = sum(not n.synthetic for n in net.nodes)
    click.echo(f"valid: {n_user} nodes ({net.N} after station expansion), {net.P} edges, "
               f"{len(net.compressors)} compressors")
    for line in certify_conditions(net, spec, phi).lines():
        click.echo(line)


if __name__ == "__main__":
    main()
