"""
Warm-starting Newton-Raphson from the relaxation
================================================

On GasLib-style scenarios the recovered relaxation solution already meets
the residual tolerance, so a warm-started Newton run needs no iterations.
This runs the three benchmark approaches on two scenarios (about a minute).
"""
from gasflow import NrOptions, builtin_instance, generate_gaslib_style
from gasflow.bench import BenchOptions, run_benchmark

insts = generate_gaslib_style(builtin_instance("gaslib40"), count=2, seed=0)
report = run_benchmark(insts, ["a1", "a2", "a3"], BenchOptions(nr=NrOptions(tol=1e-3, max_iter=50)))
for r in report.rows:
    print(f"{r.instance} {r.solver}: {r.status:<10} iterations {r.iterations:>4}  "
          f"residual {r.residual:.1e}  {r.seconds:.2f} s")
print()
print(report.table())
