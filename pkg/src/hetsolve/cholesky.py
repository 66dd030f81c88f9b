"""Right-looking blocked Cholesky with a moving horizontal border between executors.

For column ``j`` with border ``beta``: A factors the diagonal block, sub-column
rows ``[j+1, beta)`` and their trailing updates stay on A, rows ``[beta, N)``
go to B.  A sends B the diagonal block and its sub-column blocks; when the
border moves down, the crossing block rows travel back from B to A.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .core import (
    BlockedSPDMatrix,
    BlockVector,
    CholeskyPlan,
    ExecutorRole,
    SolverConfig,
    TransferKind,
    TransferLedger,
    block_index,
    make_cholesky_plan,
    num_blocks,
)
from .errors import ConfigError, NotSPD, SingularBlock
from .executor import Region, Runtime, split_rows

__all__ = [
    "CholeskyStats",
    "back_substitute",
    "factorize",
    "forward_substitute",
    "solve_spd",
]

A_, B_ = ExecutorRole.A, ExecutorRole.B


@dataclass
class CholeskyStats:
    plan: CholeskyPlan | None = None
    heterogeneous: bool = True
    ledger: TransferLedger = field(default_factory=TransferLedger)
    factor_time: float = 0.0  # factorization only, no initial transfer
    setup_time: float = 0.0
    solve_time: float = 0.0  # forward + back substitution
    wall_time: float = 0.0
    b_blocks: int = 0  # trailing-update blocks processed on B
    total_blocks: int = 0
    true_residual: float = math.nan
    tasks: dict[str, int] = field(default_factory=dict)
    # bytes copied into each memory space, independent of the ledger
    received: dict[str, int] = field(default_factory=dict)

    @property
    def realized_fraction(self) -> float:
        return self.b_blocks / self.total_blocks if self.total_blocks else 0.0

    @property
    def border_shifts(self) -> int:
        return len(self.plan.shifts) if self.plan else 0


def _row_region(i, lo_col, hi_col):
    return Region("L", block_index(i, lo_col), block_index(i, hi_col - 1) + 1)


def _factorize(rt: Runtime, A: BlockedSPDMatrix, cfg: SolverConfig, stats: CholeskyStats) -> ExecutorRole:
    """Run the factorization on ``rt``; returns the executor holding the finished factor."""
    N, b = A.N, A.b
    het = cfg.heterogeneous
    plan = make_cholesky_plan(cfg.fraction, N)
    stats.plan, stats.heterogeneous = plan, het
    stats.total_blocks = plan.total_blocks()
    home = A_ if het else cfg.home
    b3 = float(b) ** 3

    t0 = time.perf_counter()
    rt.add_matrix("L", A.blocks, home)
    if het and plan.borders[0] < N:
        rt.transfer("L", block_index(plan.borders[0], 0), num_blocks(N), A_, B_, TransferKind.INITIAL)
    stats.setup_time = time.perf_counter() - t0

    blocks = {e: rt.space(e)["L"] for e in ExecutorRole}
    tc = time.perf_counter()
    for j in range(N):
        beta = plan.borders[j] if het else N
        below = B_ if het else home
        above = A_ if het else home
        d = block_index(j, j)

        # diagonal block
        fut = rt.submit(above, K.potf_diag, (blocks[above], j), flops=b3 / 3, writes=[Region("L", d, d + 1)])
        rt.barrier()
        bad = fut.result()
        if bad >= 0:
            raise NotSPD(j, int(bad), float(blocks[above][d, bad, bad]))
        if het:
            rt.transfer("L", d, d + 1, A_, B_, TransferKind.BLOCK, step=j)

        # sub-column solves
        parts = [(above, j + 1, beta), (below, beta, N)]
        futs = []
        for e, lo, hi in parts:
            for clo, chi in split_rows(lo, hi, rt[e].workers):
                writes = [Region("L", block_index(i, j), block_index(i, j) + 1) for i in range(clo, chi)]
                futs.append(rt.submit(e, K.panel_solve_rows, (blocks[e], j, clo, chi), flops=b3 * (chi - clo),
                                      reads=[Region("L", d, d + 1)], writes=writes))
        rt.barrier()
        for f in futs:
            if f.result() >= 0:
                raise SingularBlock(int(f.result()), j)
        if het:
            for i in range(j + 1, beta):
                o = block_index(i, j)
                rt.transfer("L", o, o + 1, A_, B_, TransferKind.BLOCK, step=j)

        # trailing update
        for e, lo, hi in parts:
            for clo, chi in split_rows(lo, hi, rt[e].workers, weight=lambda i: 2 * (i - j) - 1):
                reads = [Region("L", block_index(k, j), block_index(k, j) + 1) for k in range(j + 1, chi)]
                writes = [_row_region(i, j + 1, i + 1) for i in range(clo, chi)]
                nblk = sum(i - j for i in range(clo, chi))
                flops = b3 * sum(2 * (i - j) - 1 for i in range(clo, chi))
                rt.submit(e, K.trailing_update_rows, (blocks[e], j, clo, chi), flops=flops, reads=reads, writes=writes)
                if e is B_:
                    stats.b_blocks += nblk
        rt.barrier()

        # border shift
        if het and j + 1 < N:
            for i in range(beta, plan.borders[j + 1]):
                rt.transfer("L", block_index(i, 0), block_index(i, i) + 1, B_, A_, TransferKind.BLOCK_ROW, step=j)
    stats.factor_time = time.perf_counter() - tc
    return home


def factorize(A: BlockedSPDMatrix, cfg: SolverConfig | None = None):
    """Overwrite the lower blocks of ``A`` with its Cholesky factor.

    Returns ``(A, plan, stats)``; raises :class:`NotSPD` on a non-positive pivot.
    """
    cfg = _config_for(A, cfg)
    stats = CholeskyStats()
    t0 = time.perf_counter()
    with Runtime(cfg) as rt:
        _factorize(rt, A, cfg, stats)
        stats.ledger = rt.ledger
        stats.tasks = {e.value: rt[e].tasks_run for e in ExecutorRole}
        stats.received = {e.value: rt.space(e).bytes_received for e in ExecutorRole}
    stats.wall_time = time.perf_counter() - t0
    return A, stats.plan, stats


def _config_for(A, cfg):
    if cfg is None:
        return SolverConfig(block_size=A.b)
    if cfg.block_size != A.b:
        raise ConfigError(f"config block size {cfg.block_size} does not match matrix block size {A.b}")
    return cfg


def _as_vector(rhs, L):
    if not isinstance(rhs, BlockVector):
        rhs = BlockVector.from_array(rhs, L.b)
    if rhs.n != L.n or rhs.b != L.b:
        raise ConfigError(f"vector of length {rhs.n} (b={rhs.b}) does not match {L!r}")
    return rhs


def forward_substitute(L: BlockedSPDMatrix, rhs) -> BlockVector:
    """Solve ``L y = rhs`` with blocks in ascending order."""
    y = _as_vector(rhs, L).copy()
    bad = K.forward_rows(L.blocks, y.data, L.N)
    if bad >= 0:
        raise SingularBlock(int(bad) % L.b, int(bad) // L.b)
    return y


def back_substitute(L: BlockedSPDMatrix, y) -> BlockVector:
    """Solve ``L^T x = y`` reading ``L`` transposed, blocks in descending order."""
    x = _as_vector(y, L).copy()
    bad = K.backward_rows(L.blocks, x.data, L.N)
    if bad >= 0:
        raise SingularBlock(int(bad) % L.b, int(bad) // L.b)
    return x


def _substitute(L_blocks, v, N):
    bad = K.forward_rows(L_blocks, v, N)
    if bad < 0:
        bad = K.backward_rows(L_blocks, v, N)
    return bad


def solve_spd(A: BlockedSPDMatrix, rhs, cfg: SolverConfig | None = None) -> tuple[BlockVector, CholeskyStats]:
    """Factor ``A`` in place and solve ``A x = rhs``; the triangular solves run on one executor."""
    cfg = _config_for(A, cfg)
    rhs = _as_vector(rhs, A)
    original = A.copy()
    stats = CholeskyStats()
    t0 = time.perf_counter()
    with Runtime(cfg) as rt:
        where = _factorize(rt, A, cfg, stats)
        x = rhs.copy()
        ts = time.perf_counter()
        nb = A.N * A.b
        fut = rt.submit(where, _substitute, (rt.space(where)["L"], x.data, A.N), flops=2.0 * nb * nb,
                        reads=[Region("L", 0, num_blocks(A.N))])
        rt.barrier()
        bad = fut.result()
        if bad >= 0:
            raise SingularBlock(int(bad) % A.b, int(bad) // A.b)
        stats.solve_time = time.perf_counter() - ts
        stats.ledger = rt.ledger
        stats.tasks = {e.value: rt[e].tasks_run for e in ExecutorRole}
        stats.received = {e.value: rt.space(e).bytes_received for e in ExecutorRole}
    stats.wall_time = time.perf_counter() - t0
    y = np.zeros(nb)
    K.symv_rows(original.blocks, x.data, y, A.N, 0, A.N)
    stats.true_residual = float(np.linalg.norm(rhs.values - y[: A.n]))
    return x, stats
