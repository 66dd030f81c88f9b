"""Conjugate gradients with the block-row split between executors A and B."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .core import (
    BlockedSPDMatrix,
    BlockVector,
    ExecutorRole,
    Partition,
    SolverConfig,
    TransferKind,
    TransferLedger,
    num_blocks,
    partition_for_fraction,
)
from .errors import ConfigError, NotConverged, NumericalError
from .executor import Region, Runtime, split_rows

log = logging.getLogger(__name__)

__all__ = ["CGStats", "recompute_true_residual", "solve_cg", "true_residual"]

A_, B_ = ExecutorRole.A, ExecutorRole.B


@dataclass
class CGStats:
    iterations: int = 0
    recomputations: int = 0
    converged: bool = False
    initial_residual: float = math.nan
    true_residual: float = math.nan
    wall_time: float = 0.0
    compute_time: float = 0.0
    heterogeneous: bool = True
    partition: Partition | None = None
    ledger: TransferLedger = field(default_factory=TransferLedger)
    # (u, alpha, beta) after every iteration
    trace: list[tuple[float, float, float]] = field(default_factory=list)
    tasks: dict[str, int] = field(default_factory=dict)
    # bytes copied into each memory space, independent of the ledger
    received: dict[str, int] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "not_converged"

    def raise_for_status(self, max_iters):
        if not self.converged:
            raise NotConverged(max_iters)


def true_residual(A: BlockedSPDMatrix, rhs: BlockVector, x: BlockVector) -> float:
    """``||rhs - A x||_2`` over the logical ``n`` entries."""
    y = np.zeros(A.N * A.b)
    K.symv_rows(A.blocks, x.data, y, A.N, 0, A.N)
    return float(np.linalg.norm(rhs.values - y[: A.n]))


class _CGRun:
    """One solve: owns the runtime, the per-executor scratch and the split."""

    def __init__(self, A: BlockedSPDMatrix, rhs: BlockVector, cfg: SolverConfig, rt: Runtime):
        self.A, self.rhs, self.cfg, self.rt = A, rhs, cfg, rt
        self.N, self.b = A.N, A.b
        self.part = partition_for_fraction(cfg.fraction, A.N)
        self.het = cfg.heterogeneous
        r = self.part.split_row
        if self.het:
            self.segments = [(B_, 0, r), (A_, r, self.N)]
            self.home = A_
        else:
            self.segments = [(cfg.home, 0, self.N)]
            self.home = cfg.home
        self.roles = sorted({s[0] for s in self.segments}, key=lambda e: e.value)
        self.dots = {e: np.zeros(self.N) for e in self.roles}
        self.mat = Region("A", 0, num_blocks(self.N))

    def arr(self, role, name):
        return self.rt.space(role)[name]

    def setup(self):
        rt, n, b, N = self.rt, self.A.n, self.b, self.N
        rt.add_matrix("A", self.A.blocks, self.home)
        rt.add_vector("rhs", self.rhs.data, b, n, self.home)
        for name in ("x", "r", "s", "t"):
            rt.add_zero_vector(name, N * b, b, n)
        if self.het:
            # B keeps a full replica of the lower triangle and of rhs
            rt.transfer("A", 0, num_blocks(N), A_, B_, TransferKind.INITIAL)
            rt.transfer("rhs", 0, N, A_, B_, TransferKind.INITIAL)
        # s = r = rhs - A*0: each side derives identical copies from its own rhs
        for e in self.roles:
            rt.submit(e, _init_vectors, (self.arr(e, "rhs"), self.arr(e, "r"), self.arr(e, "s")),
                      flops=0, reads=[Region("rhs", 0, N)])
        rt.submit(self.home, K.block_dots,
                  (self.arr(self.home, "rhs"), self.arr(self.home, "rhs"), b, 0, N, self.dots[self.home]),
                  flops=2 * N * b, reads=[Region("rhs", 0, N)])
        rt.barrier()
        return K.fold(0.0, self.dots[self.home], 0, N)

    def each_chunk(self, fn, build, flops_per_row, reads=(), writes=None):
        for e, lo, hi in self.segments:
            for clo, chi in split_rows(lo, hi, self.rt[e].workers):
                w = [Region(name, clo, chi) for name in (writes or ())]
                self.rt.submit(e, fn, build(e, clo, chi), flops=flops_per_row * (chi - clo),
                               reads=reads, writes=w)
        self.rt.barrier()

    def combine(self, step):
        """Fold per-block partials in ascending block order; B's partial travels to A."""
        if not self.het:
            return K.fold(0.0, self.dots[self.home], 0, self.N)
        r = self.part.split_row
        partial = self.rt.transfer_scalar(K.fold(0.0, self.dots[B_], 0, r), B_, A_, step)
        return K.fold(partial, self.dots[A_], r, self.N)

    def matvec_dot(self):
        N, b = self.N, self.b
        self.each_chunk(
            K.cg_matvec_rows,
            lambda e, lo, hi: (self.arr(e, "A"), self.arr(e, "s"), self.arr(e, "t"), self.dots[e], N, lo, hi),
            2 * b * b * N + 2 * b,
            reads=[self.mat, Region("s", 0, N)],
            writes=["t"],
        )

    def update(self, alpha):
        b = self.b
        self.each_chunk(
            K.cg_update_rows,
            lambda e, lo, hi: (self.arr(e, "x"), self.arr(e, "r"), self.arr(e, "s"), self.arr(e, "t"),
                               alpha, self.dots[e], b, lo, hi),
            6 * b,
            writes=["x", "r"],
        )

    def recompute(self, alpha, step):
        """Residual update replaced by r = rhs - A x; costs one extra exchange of x."""
        N, b = self.N, self.b
        self.each_chunk(
            K.cg_step_x_rows,
            lambda e, lo, hi: (self.arr(e, "x"), self.arr(e, "s"), alpha, b, lo, hi),
            2 * b,
            writes=["x"],
        )
        if self.het:
            self.rt.exchange("x", self.part.split_row, step=step)
        self.each_chunk(
            K.cg_residual_rows,
            lambda e, lo, hi: (self.arr(e, "A"), self.arr(e, "x"), self.arr(e, "rhs"), self.arr(e, "r"),
                               self.dots[e], N, lo, hi),
            2 * b * b * N + 3 * b,
            reads=[self.mat, Region("x", 0, N)],
            writes=["r"],
        )

    def direction(self, beta, step):
        b = self.b
        self.each_chunk(
            K.cg_direction_rows,
            lambda e, lo, hi: (self.arr(e, "s"), self.arr(e, "r"), beta, b, lo, hi),
            2 * b,
            writes=["s"],
        )
        if self.het:
            self.rt.exchange("s", self.part.split_row, step=step)

    def collect_x(self) -> BlockVector:
        if self.het:
            self.rt.transfer("x", 0, self.part.split_row, B_, A_, TransferKind.RESULT)
        return BlockVector(self.A.n, self.b, self.arr(self.home, "x").copy())


def _init_vectors(rhs, r, s):
    r[:] = rhs
    s[:] = rhs


def _check(name, value):
    if not math.isfinite(value):
        raise NumericalError(f"CG produced non-finite {name} = {value}")


def solve_cg(A: BlockedSPDMatrix, rhs, cfg: SolverConfig | None = None) -> tuple[BlockVector, CGStats]:
    """Solve ``A x = rhs`` by CG from ``x0 = 0``.

    Stops once the recurrence residual satisfies ``u <= eps^2 u0`` or after
    ``cfg.max_iters`` iterations; the second case returns the last iterate with
    ``stats.converged = False``.
    """
    cfg = cfg or SolverConfig(block_size=A.b)
    if not isinstance(rhs, BlockVector):
        rhs = BlockVector.from_array(rhs, A.b)
    if rhs.n != A.n or rhs.b != A.b:
        raise ConfigError(f"rhs of length {rhs.n} (b={rhs.b}) does not match {A!r}")

    stats = CGStats(heterogeneous=cfg.heterogeneous)
    with Runtime(cfg) as rt:
        run = _CGRun(A, rhs, cfg, rt)
        stats.partition = run.part
        t0 = time.perf_counter()
        u0 = run.setup()
        _check("u0", u0)
        u = u0
        threshold = cfg.eps * cfg.eps * u0
        k = 0
        tc = time.perf_counter()
        while u > threshold and k < cfg.max_iters:
            k += 1
            run.matvec_dot()  # t = A s, s.t
            v = run.combine(k)
            alpha = u / v if v != 0.0 else math.inf
            _check("alpha", alpha)
            if v <= 0.0:
                raise NumericalError(f"non-positive curvature s.t = {v}; matrix is not SPD")
            if cfg.recompute_interval and k % cfg.recompute_interval == 0:
                run.recompute(alpha, k)
                stats.recomputations += 1
            else:
                run.update(alpha)  # x, r and r.r
            u_new = run.combine(k)
            _check("u", u_new)
            beta = u_new / u
            _check("beta", beta)
            u = u_new
            run.direction(beta, k)  # s = r + beta s
            stats.trace.append((u, alpha, beta))
        stats.compute_time = time.perf_counter() - tc
        x = run.collect_x()
        stats.wall_time = time.perf_counter() - t0
        stats.iterations = k
        stats.converged = u <= threshold
        stats.ledger = rt.ledger
        stats.tasks = {e.value: rt[e].tasks_run for e in ExecutorRole}
        stats.received = {e.value: rt.space(e).bytes_received for e in ExecutorRole}

    stats.initial_residual = math.sqrt(u0)
    stats.true_residual = true_residual(A, rhs, x)
    log.debug("cg: %d iterations, %d recomputations, converged=%s", k, stats.recomputations, stats.converged)
    return x, stats


def recompute_true_residual(A: BlockedSPDMatrix, rhs: BlockVector, x: BlockVector) -> tuple[BlockVector, float]:
    """Single-space ``r = rhs - A x`` and ``u = r.r`` with the solver's reduction order."""
    r = BlockVector(A.n, A.b)
    dots = np.zeros(A.N)
    K.cg_residual_rows(A.blocks, x.data, rhs.data, r.data, dots, A.N, 0, A.N)
    return r, float(K.fold(0.0, dots, 0, A.N))
