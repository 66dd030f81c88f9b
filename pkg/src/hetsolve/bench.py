"""Repeated timed solves and parameter sweeps producing CSV rows."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import statistics
from dataclasses import dataclass

from .cg import solve_cg
from .cholesky import solve_spd
from .core import BlockedSPDMatrix, BlockVector, SolverConfig, TransferKind
from .errors import ConfigError, HetSolveError
from .genmat import KernelParams, generate_rhs, generate_spd

log = logging.getLogger(__name__)

__all__ = ["CSV_FIELDS", "ALGOS", "argmin_summary", "run_solve", "run_sweep", "write_csv"]

ALGOS = ("cg", "cholesky")

CSV_FIELDS = (
    "algo", "n", "block_size", "fraction", "workers_a", "workers_b", "slowdown_a", "slowdown_b",
    "reps", "runtime_ms_median", "runtime_ms_mean", "compute_ms_median", "iters", "recomputes",
    "true_residual", "bytes_total", "bytes_scalar", "bytes_subvector", "bytes_block",
    "bytes_block_row", "border_shifts", "status", "seed",
)


@dataclass
class SolveResult:
    row: dict
    runtimes: list[float]
    stats: object = None
    x: BlockVector | None = None


def _once(algo, A: BlockedSPDMatrix, rhs: BlockVector, cfg: SolverConfig):
    if algo == "cg":
        x, st = solve_cg(A, rhs, cfg)
        return x, st, st.compute_time
    if algo == "cholesky":
        x, st = solve_spd(A.copy(), rhs, cfg)
        return x, st, st.factor_time
    raise ConfigError(f"unknown algorithm {algo!r}")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def run_solve(algo: str, A: BlockedSPDMatrix, rhs: BlockVector, cfg: SolverConfig,
              reps: int = 10, warmup: bool = True) -> SolveResult:
    """Time ``reps`` solves (after one discarded warmup) and build one CSV row.

    Numerical failures are reported through the ``status`` column, not raised.
    """
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    row = {
        "algo": algo, "n": A.n, "block_size": A.b, "fraction": float(cfg.fraction),
        "workers_a": cfg.workers_a, "workers_b": cfg.workers_b,
        "slowdown_a": float(cfg.slowdown_a), "slowdown_b": float(cfg.slowdown_b),
        "reps": reps, "seed": cfg.seed,
    }
    runtimes, computes = [], []
    x = st = None
    try:
        if warmup:
            _once(algo, A, rhs, cfg)
        for _ in range(reps):
            x, st, compute = _once(algo, A, rhs, cfg)
            runtimes.append(st.wall_time)
            computes.append(compute)
    except HetSolveError as exc:
        log.warning("%s n=%d b=%d f=%s failed: %s", algo, A.n, A.b, cfg.fraction, exc)
        row.update({k: "" for k in CSV_FIELDS if k not in row})
        row["status"] = exc.kind
        return SolveResult(row, runtimes)

    summary = st.ledger.summary()
    row.update({
        "runtime_ms_median": round(statistics.median(runtimes) * 1e3, 3),
        "runtime_ms_mean": round(statistics.fmean(runtimes) * 1e3, 3),
        "compute_ms_median": round(statistics.median(computes) * 1e3, 3),
        "iters": getattr(st, "iterations", 0),
        "recomputes": getattr(st, "recomputations", 0),
        "true_residual": st.true_residual,
        "bytes_total": summary["total"],
        "bytes_scalar": summary[TransferKind.SCALAR.value],
        "bytes_subvector": summary[TransferKind.SUBVECTOR.value],
        "bytes_block": summary[TransferKind.BLOCK.value],
        "bytes_block_row": summary[TransferKind.BLOCK_ROW.value],
        "border_shifts": getattr(st, "border_shifts", 0),
        "status": st.status if algo == "cg" else "ok",
    })
    return SolveResult(row, runtimes, st, x)


def run_sweep(algos, sizes, block_sizes, fractions, base: SolverConfig, reps: int = 10,
              warmup: bool = True, params: KernelParams | None = None, matrix: BlockedSPDMatrix | None = None,
              progress=None) -> list[dict]:
    """Cross product ``algos x sizes x block_sizes x fractions`` in that nesting order.

    With ``matrix`` given, ``sizes`` is ignored and the matrix is re-blocked as needed.
    """
    for name, grid in (("algorithm", algos), ("size", sizes), ("block size", block_sizes), ("fraction", fractions)):
        if not grid and not (name == "size" and matrix is not None):
            raise ConfigError(f"empty {name} grid")
    rows = []
    cache = {}
    sizes = [matrix.n] if matrix is not None else list(sizes)
    for algo in algos:
        for n in sizes:
            for b in block_sizes:
                if (n, b) not in cache:
                    if matrix is not None:
                        A = matrix if matrix.b == b else BlockedSPDMatrix.from_dense(matrix.to_dense(), b)
                    else:
                        A = generate_spd(n, b, params, base.seed)
                    cache[(n, b)] = (A, generate_rhs(n, b, base.seed))
                A, rhs = cache[(n, b)]
                for f in fractions:
                    cfg = dataclasses.replace(base, fraction=float(f), block_size=b)
                    res = run_solve(algo, A, rhs, cfg, reps=reps, warmup=warmup)
                    rows.append(res.row)
                    if progress:
                        progress(res.row)
    return rows


def argmin_summary(rows) -> list[dict]:
    """Fraction with the lowest median runtime per (algo, n), over successful rows."""
    best = {}
    for r in rows:
        if r["status"] not in ("ok", "converged"):
            continue
        key = (r["algo"], r["n"])
        if key not in best or r["runtime_ms_median"] < best[key]["runtime_ms_median"]:
            best[key] = r
    return [
        {"algo": a, "n": n, "block_size": r["block_size"], "best_fraction": r["fraction"],
         "runtime_ms_median": r["runtime_ms_median"]}
        for (a, n), r in best.items()
    ]


def write_csv(rows, fh=None, fields=CSV_FIELDS) -> str | None:
    """Write rows with a header; returns the text when ``fh`` is None."""
    out = fh or io.StringIO()
    w = csv.DictWriter(out, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in fields})
    return out.getvalue() if fh is None else None
