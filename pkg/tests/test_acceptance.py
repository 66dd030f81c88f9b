"""Acceptance suite: one group of checks per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints a
PASS/FAIL line per criterion with the measured values.
"""

import dataclasses
import itertools

import numpy as np
import pytest
from oracles import crout, crout_fast, gauss_solve, random_spd

from hetsolve import (
    BlockedSPDMatrix,
    FormatError,
    SolverConfig,
    TransferKind,
    TruncatedFile,
    VersionMismatch,
    factorize,
    generate_rhs,
    generate_spd,
    load_matrix,
    save_matrix,
    solve_cg,
)
from hetsolve.bench import run_solve, run_sweep
from hetsolve.cli import parse_grid
from hetsolve.core import Direction

SIZES = (256, 512, 1024, 2048)
BLOCKS = (16, 32, 64, 128)
SPLITS = (0.0, 0.25, 0.5, 0.75, 1.0)


# 1. Cholesky reconstruction --------------------------------------------------

@pytest.mark.criterion(1)
@pytest.mark.parametrize("n, b", list(itertools.product(SIZES, BLOCKS)))
def test_cholesky_reconstruction(n, b, record_property):
    A = generate_spd(n, b, seed=n + b)
    D = A.to_dense()
    L, _, _ = factorize(A, SolverConfig(block_size=b, fraction=0.5, workers_b=2))
    Ld = L.lower_dense()
    err = np.linalg.norm(D - Ld @ Ld.T) / np.linalg.norm(D)
    record_property("rel_error", f"{err:.2e}")
    assert err <= 1e-12


# 2. blocked vs unblocked oracle ---------------------------------------------

@pytest.mark.criterion(2)
@pytest.mark.parametrize("n, b", [(64, 16), (100, 7), (256, 32), (512, 16), (512, 64), (512, 128)])
def test_blocked_matches_crout(n, b, record_property):
    A = generate_spd(n, b, seed=7)
    D = A.to_dense()
    ref = crout(D) if n <= 100 else crout_fast(D)
    L, _, _ = factorize(A, SolverConfig(block_size=b, fraction=0.6))
    err = np.max(np.abs(L.lower_dense() - ref))
    record_property("max_abs_diff", f"{err:.2e}")
    assert err <= 1e-10 * np.max(np.abs(D))


# 3. CG convergence contract --------------------------------------------------

@pytest.mark.criterion(3)
@pytest.mark.parametrize("n, b", list(itertools.product(SIZES, BLOCKS)))
def test_cg_true_residual(n, b, record_property):
    A, rhs = generate_spd(n, b, seed=n + b), generate_rhs(n, b, seed=n + b)
    eps = 1e-6
    _, st = solve_cg(A, rhs, SolverConfig(block_size=b, fraction=0.5, eps=eps))
    ratio = st.true_residual / st.initial_residual
    record_property("iters / residual ratio", f"{st.iterations} / {ratio:.2e}")
    assert st.converged
    assert st.true_residual <= 2 * eps * st.initial_residual


@pytest.mark.criterion(3)
@pytest.mark.parametrize("seed", range(10))
def test_cg_small_against_elimination(seed):
    rng = np.random.default_rng(100 + seed)
    D = random_spd(8, rng, cond=1e3)
    rhs = rng.standard_normal(8)
    x, _ = solve_cg(BlockedSPDMatrix.from_dense(D, 2), rhs, SolverConfig(block_size=2, fraction=0.5))
    ref = gauss_solve(D, rhs)
    assert np.linalg.norm(x.values - ref) <= 1e-5 * np.linalg.norm(ref)


# 4. bitwise split invariance -------------------------------------------------

@pytest.mark.criterion(4)
def test_cholesky_split_invariance():
    A = generate_spd(512, 32, seed=4)
    factors = [factorize(A.copy(), SolverConfig(block_size=32, fraction=f, workers_a=2, workers_b=4))[0].blocks
               for f in SPLITS]
    for L in factors[1:]:
        assert np.array_equal(L, factors[0])


@pytest.mark.criterion(4)
def test_cg_split_invariance(record_property):
    A, rhs = generate_spd(512, 32, seed=4), generate_rhs(512, 32, seed=4)
    runs = [solve_cg(A, rhs, SolverConfig(block_size=32, fraction=f, workers_a=2, workers_b=4,
                                          recompute_interval=10)) for f in SPLITS]
    x0, s0 = runs[0]
    record_property("iterations", s0.iterations)
    for x, s in runs[1:]:
        assert s.trace == s0.trace
        assert x.data.tobytes() == x0.data.tobytes()


# 5. communication contract ---------------------------------------------------

@pytest.mark.criterion(5)
@pytest.mark.parametrize("n", [256, 1024])
@pytest.mark.parametrize("f", [0.25, 0.5, 0.85])
def test_cg_ledger(n, f):
    A, rhs = generate_spd(n, 32, seed=1), generate_rhs(n, 32, seed=1)
    _, st = solve_cg(A, rhs, SolverConfig(block_size=32, fraction=f, recompute_interval=10))
    k, m = st.iterations, st.recomputations
    assert m == k // 10 and m > 0
    assert st.ledger.count(TransferKind.SCALAR) == 2 * k
    assert st.ledger.count(TransferKind.SCALAR, Direction.B_TO_A) == 2 * k
    assert st.ledger.count(TransferKind.SUBVECTOR) == k + m


@pytest.mark.criterion(5)
@pytest.mark.parametrize("n", [256, 1024])
@pytest.mark.parametrize("f", [0.25, 0.5, 0.85, 1.0])
def test_cholesky_ledger(n, f):
    b = 32
    A = generate_spd(n, b, seed=1)
    _, plan, st = factorize(A, SolverConfig(block_size=b, fraction=f, mode="hetero"))
    for j, beta in enumerate(plan.borders):
        assert st.ledger.count(TransferKind.BLOCK, Direction.A_TO_B, step=j) == 1 + (beta - j - 1)
    expected = sum(
        (i + 1) * b * b * 8 for j, m in plan.shifts for i in range(plan.borders[j], plan.borders[j] + m)
    )
    assert st.ledger.total_bytes(TransferKind.BLOCK_ROW) == expected


# 6 and 7. split-curve shape and heterogeneous benefit ----------------------------
#
# Two executors on one host are emulated by a per-worker throughput cap
# (pace_gflops); B has four workers, A has one.  The caps sit below what a
# single core sustains for each algorithm's kernels, so the modelled devices
# rather than host contention set the runtimes.

N_SWEEP = 2048
FRACTION_GRID = parse_grid("0:1:0.05")
PACE = {"cholesky": 0.25, "cg": 0.1}
REPS = {"cholesky": 1, "cg": 3}


def _base(algo):
    return SolverConfig(block_size=64, workers_a=1, workers_b=4, pace_gflops=PACE[algo])


@pytest.fixture(scope="module", params=["cg", "cholesky"])
def sweep(request):
    algo = request.param
    base = _base(algo)
    A, rhs = generate_spd(N_SWEEP, 64, seed=0), generate_rhs(N_SWEEP, 64, seed=0)
    run_solve(algo, generate_spd(256, 64), generate_rhs(256, 64), dataclasses.replace(base, fraction=0.5),
              reps=1, warmup=False)  # compile kernels outside the timed runs
    rows = run_sweep([algo], [N_SWEEP], [64], FRACTION_GRID, dataclasses.replace(base, mode="hetero"),
                     reps=REPS[algo], warmup=False, matrix=A)
    # baselines afterwards, in the same warmed-up process state as the sweep endpoints
    homog = {f: run_solve(algo, A, rhs, dataclasses.replace(base, fraction=f, mode="homogeneous"),
                          reps=REPS[algo], warmup=False).row["runtime_ms_median"] for f in (0.0, 1.0)}
    assert all(r["status"] in ("ok", "converged") for r in rows)
    curve = {r["fraction"]: r["runtime_ms_median"] for r in rows}
    return algo, curve, homog


def _describe(curve):
    return " ".join(f"{f:g}:{t:.0f}" for f, t in curve.items())


@pytest.mark.criterion(6)
def test_split_curve_shape(sweep, record_property):
    algo, curve, homog = sweep
    best = min(curve, key=curve.get)
    record_property(f"{algo} curve ms", _describe(curve))
    record_property(f"{algo} homogeneous ms", f"f=0:{homog[0.0]:.0f} f=1:{homog[1.0]:.0f}")
    record_property(f"{algo} argmin", best)
    assert 0.5 < best < 1.0
    for f in (0.0, 1.0):
        assert abs(curve[f] - homog[f]) <= 0.15 * homog[f]


@pytest.mark.criterion(7)
def test_heterogeneous_benefit(sweep, record_property):
    algo, curve, homog = sweep
    best = min(curve.values())
    record_property(f"{algo} best hetero / homogeneous B", f"{best:.0f} / {homog[1.0]:.0f} ms")
    assert best < homog[1.0]


# 8. format round trip --------------------------------------------------------

@pytest.mark.criterion(8)
def test_bspd_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    for k in range(20):
        n, b = int(rng.integers(1, 200)), int(rng.integers(1, 40))
        S = rng.standard_normal((n, n))
        M = BlockedSPDMatrix.from_dense(S + S.T, b)
        path = tmp_path / f"m{k}.bspd"
        save_matrix(path, M)
        R = load_matrix(path)
        assert (R.n, R.b) == (n, b)
        assert R.blocks.tobytes() == M.blocks.tobytes()


@pytest.mark.criterion(8)
def test_bspd_error_kinds(tmp_path):
    path = tmp_path / "m.bspd"
    save_matrix(path, generate_spd(50, 16))
    good = path.read_bytes()
    kinds = set()

    path.write_bytes(b"ABCD" + good[4:])
    with pytest.raises(FormatError) as e:
        load_matrix(path)
    kinds.add(e.value.kind)

    path.write_bytes(good[:4] + bytes([7]) + good[5:])
    with pytest.raises(VersionMismatch) as e:
        load_matrix(path)
    kinds.add(e.value.kind)

    path.write_bytes(good[: len(good) // 2])
    with pytest.raises(TruncatedFile) as e:
        load_matrix(path)
    assert e.value.expected == len(good) and e.value.actual == len(good) // 2
    kinds.add(e.value.kind)
    assert len(kinds) == 3
