"""
Sweeping the split fraction
===========================

Executor B gets four workers and A one.  Each worker is capped at a fixed
GFLOP/s rate so the two sides behave like devices of different speed even on
a small host.  The runtime drops as work moves to B, bottoms out before f = 1,
then climbs again once A sits idle.
"""

import dataclasses

from hetsolve import SolverConfig, generate_rhs, generate_spd
from hetsolve.bench import argmin_summary, run_solve, run_sweep

n, b = 1024, 64
A, rhs = generate_spd(n, b), generate_rhs(n, b)
fractions = [round(0.1 * k, 1) for k in range(11)]

for algo, pace in (("cg", 0.1), ("cholesky", 0.25)):
    base = SolverConfig(block_size=b, workers_a=1, workers_b=4, pace_gflops=pace)
    run_solve(algo, generate_spd(128, b), generate_rhs(128, b), dataclasses.replace(base, fraction=0.5), reps=1)

    rows = run_sweep([algo], [n], [b], fractions, base, reps=1, warmup=False, matrix=A)
    longest = max(r["runtime_ms_median"] for r in rows)
    print(algo)
    for r in rows:
        bar = "#" * int(40 * r["runtime_ms_median"] / longest)
        print("  f=%.1f %8.1f ms %s" % (r["fraction"], r["runtime_ms_median"], bar))
    best = argmin_summary(rows)[0]
    print("  fastest split: f=%.1f" % best["best_fraction"])
