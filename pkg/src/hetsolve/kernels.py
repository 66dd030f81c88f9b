"""Dense FP64 block kernels.

Every output element is accumulated sequentially in ascending index order, so
a kernel gives bit-identical results however the surrounding work is split
between executors or workers.  Loops are compiled with numba (no fastmath, so
no reassociation or FMA contraction) and release the GIL.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .core import BlockedSPDMatrix, BlockVector
from .errors import NotSPD, NumericalError, SingularBlock

__all__ = [
    "axpy_range",
    "dot_range",
    "gemm_update",
    "potf_block",
    "symv_range",
    "syrk_update",
    "trsm_block",
    "xpay_range",
]

_jit = njit(nogil=True, cache=True)


@_jit
def _tri(i, j):
    return i * (i + 1) // 2 + j


# --- single-block kernels --------------------------------------------------

@_jit
def _potf(D):
    """In-place Cholesky-Crout of the lower triangle; returns failing pivot or -1."""
    b = D.shape[0]
    for p in range(b):
        for q in range(p):
            s = D[p, q]
            for k in range(q):
                s -= D[p, k] * D[q, k]
            D[p, q] = s / D[q, q]
        s = D[p, p]
        for k in range(p):
            s -= D[p, k] * D[p, k]
        if not s > 0.0:
            D[p, p] = s
            return p
        D[p, p] = math.sqrt(s)
    return -1


@_jit
def _check_diag(L):
    for q in range(L.shape[0]):
        d = L[q, q]
        if d == 0.0 or not math.isfinite(d):
            return q
    return -1


@_jit
def _trsm(X, L):
    """X <- X L^-T, row by row, columns of L in forward order."""
    b = X.shape[0]
    for p in range(b):
        for q in range(b):
            s = X[p, q]
            for k in range(q):
                s -= X[p, k] * L[q, k]
            X[p, q] = s / L[q, q]


@_jit
def _transpose_into(dst, src):
    b = src.shape[0]
    for k in range(b):
        for j in range(b):
            dst[k, j] = src[j, k]


@_jit
def _gemm_t(C, P, Qt, acc):
    """C <- C - P Q^T given Qt = Q^T; acc is scratch of length b."""
    b = C.shape[0]
    for i in range(b):
        for j in range(b):
            acc[j] = 0.0
        for k in range(b):
            p = P[i, k]
            for j in range(b):
                acc[j] += p * Qt[k, j]
        for j in range(b):
            C[i, j] -= acc[j]


@_jit
def _syrk_t(C, P, Pt, acc):
    """lower(C) <- lower(C - P P^T); the strict upper triangle is not touched."""
    b = C.shape[0]
    for i in range(b):
        for j in range(i + 1):
            acc[j] = 0.0
        for k in range(b):
            p = P[i, k]
            for j in range(i + 1):
                acc[j] += p * Pt[k, j]
        for j in range(i + 1):
            C[i, j] -= acc[j]


# --- block-range kernels used by the solvers -------------------------------

@_jit
def panel_solve_rows(blocks, j, lo, hi):
    """Sub-column solves A_ij <- A_ij A_jj^-T for block rows [lo, hi)."""
    L = blocks[_tri(j, j)]
    bad = _check_diag(L)
    if bad >= 0:
        return bad
    for i in range(lo, hi):
        _trsm(blocks[_tri(i, j)], L)
    return -1


@_jit
def trailing_update_rows(blocks, j, lo, hi):
    """Trailing update of column j for target block rows [lo, hi)."""
    if hi <= lo:
        return
    b = blocks.shape[1]
    panel_t = np.empty((hi - j - 1, b, b))
    for k in range(j + 1, hi):
        _transpose_into(panel_t[k - j - 1], blocks[_tri(k, j)])
    acc = np.empty(b)
    for i in range(lo, hi):
        P = blocks[_tri(i, j)]
        _syrk_t(blocks[_tri(i, i)], P, panel_t[i - j - 1], acc)
        for k in range(j + 1, i):
            _gemm_t(blocks[_tri(i, k)], P, panel_t[k - j - 1], acc)


@_jit
def potf_diag(blocks, j):
    return _potf(blocks[_tri(j, j)])


@_jit
def symv_rows(blocks, x, y, N, lo, hi):
    """y[rows] = A x for block rows [lo, hi) of a packed symmetric matrix."""
    b = blocks.shape[1]
    acc = np.empty(b)
    for i in range(lo, hi):
        for p in range(b):
            acc[p] = 0.0
        for jb in range(N):
            base = jb * b
            if jb < i:
                blk = blocks[_tri(i, jb)]
                for q in range(b):
                    xq = x[base + q]
                    for p in range(b):
                        acc[p] += blk[p, q] * xq
            elif jb == i:
                blk = blocks[_tri(i, i)]
                for q in range(b):
                    xq = x[base + q]
                    for p in range(b):
                        if p >= q:
                            acc[p] += blk[p, q] * xq
                        else:
                            acc[p] += blk[q, p] * xq
            else:
                blk = blocks[_tri(jb, i)]
                for q in range(b):
                    xq = x[base + q]
                    for p in range(b):
                        acc[p] += blk[q, p] * xq
        for p in range(b):
            y[i * b + p] = acc[p]


@_jit
def block_dots(u, v, b, lo, hi, out):
    """out[i] = sequential dot product of block row i, for i in [lo, hi)."""
    for i in range(lo, hi):
        s = 0.0
        for k in range(i * b, (i + 1) * b):
            s += u[k] * v[k]
        out[i] = s


@_jit
def cg_matvec_rows(blocks, s, t, dots, N, lo, hi):
    """t = A s on [lo, hi) plus per-block partials of s.t."""
    b = blocks.shape[1]
    symv_rows(blocks, s, t, N, lo, hi)
    block_dots(s, t, b, lo, hi, dots)


@_jit
def cg_update_rows(x, r, s, t, alpha, dots, b, lo, hi):
    """x += alpha s; r -= alpha t; per-block partials of r.r."""
    for k in range(lo * b, hi * b):
        x[k] += alpha * s[k]
        r[k] -= alpha * t[k]
    block_dots(r, r, b, lo, hi, dots)


@_jit
def cg_step_x_rows(x, s, alpha, b, lo, hi):
    for k in range(lo * b, hi * b):
        x[k] += alpha * s[k]


@_jit
def cg_residual_rows(blocks, x, rhs, r, dots, N, lo, hi):
    """r = rhs - A x on [lo, hi) plus per-block partials of r.r."""
    b = blocks.shape[1]
    symv_rows(blocks, x, r, N, lo, hi)
    for k in range(lo * b, hi * b):
        r[k] = rhs[k] - r[k]
    block_dots(r, r, b, lo, hi, dots)


@_jit
def cg_direction_rows(s, r, beta, b, lo, hi):
    """s = r + beta s."""
    for k in range(lo * b, hi * b):
        s[k] = r[k] + beta * s[k]


@_jit
def forward_rows(blocks, y, N):
    """Solve L y = rhs in place (y holds rhs on entry)."""
    b = blocks.shape[1]
    for i in range(N):
        for p in range(b):
            s = y[i * b + p]
            for jb in range(i):
                blk = blocks[_tri(i, jb)]
                for q in range(b):
                    s -= blk[p, q] * y[jb * b + q]
            D = blocks[_tri(i, i)]
            for q in range(p):
                s -= D[p, q] * y[i * b + q]
            d = D[p, p]
            if d == 0.0 or not math.isfinite(d):
                return i * b + p
            y[i * b + p] = s / d
    return -1


@_jit
def backward_rows(blocks, x, N):
    """Solve L^T x = y in place (x holds y on entry)."""
    b = blocks.shape[1]
    for i in range(N - 1, -1, -1):
        for p in range(b - 1, -1, -1):
            s = x[i * b + p]
            for jb in range(i + 1, N):
                blk = blocks[_tri(jb, i)]
                for q in range(b):
                    s -= blk[q, p] * x[jb * b + q]
            D = blocks[_tri(i, i)]
            for q in range(p + 1, b):
                s -= D[q, p] * x[i * b + q]
            d = D[p, p]
            if d == 0.0 or not math.isfinite(d):
                return i * b + p
            x[i * b + p] = s / d
    return -1


@_jit
def fold(init, partials, lo, hi):
    s = init
    for i in range(lo, hi):
        s += partials[i]
    return s


# --- public per-block API --------------------------------------------------

def _as_block(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square block")
    return a


def potf_block(D, block_row: int = 0) -> np.ndarray:
    """Factor the lower triangle of ``D`` in place; the strict upper part is left alone."""
    D = _as_block(D, "D")
    if not D.flags.c_contiguous or not D.flags.writeable:
        raise ValueError("D must be a writeable C-contiguous block")
    bad = _potf(D)
    if bad >= 0:
        raise NotSPD(block_row, int(bad), float(D[bad, bad]))
    return D


def trsm_block(B, L) -> np.ndarray:
    """Overwrite ``B`` with ``X`` such that ``X @ L.T == B``."""
    B = _as_block(B, "B")
    L = _as_block(L, "L")
    bad = _check_diag(L)
    if bad >= 0:
        raise SingularBlock(int(bad))
    _trsm(B, L)
    return B


def _finite_or_raise(C, what):
    if not np.isfinite(C).all():
        raise NumericalError(f"non-finite value produced by {what}")


def gemm_update(C, P, Q) -> np.ndarray:
    """``C <- C - P @ Q.T`` in place with ascending-index accumulation."""
    C = _as_block(C, "C")
    P = _as_block(P, "P")
    Q = _as_block(Q, "Q")
    _gemm_t(C, P, np.ascontiguousarray(Q.T), np.empty(C.shape[0]))
    _finite_or_raise(C, "gemm_update")
    return C


def syrk_update(C, P) -> np.ndarray:
    """``lower(C) <- lower(C - P @ P.T)`` in place."""
    C = _as_block(C, "C")
    P = _as_block(P, "P")
    _syrk_t(C, P, np.ascontiguousarray(P.T), np.empty(C.shape[0]))
    _finite_or_raise(np.tril(C), "syrk_update")
    return C


def _check_rows(lo, hi, N):
    if not 0 <= lo <= hi <= N:
        raise IndexError(f"row interval [{lo}, {hi}) outside [0, {N}]")


def symv_range(A: BlockedSPDMatrix, x: BlockVector, lo: int, hi: int) -> np.ndarray:
    """Rows ``[lo, hi)`` (in blocks) of ``A @ x``; returns ``(hi - lo) * b`` values."""
    _check_rows(lo, hi, A.N)
    y = np.zeros(A.N * A.b)
    if hi > lo:
        symv_rows(A.blocks, x.data, y, A.N, lo, hi)
    return y[lo * A.b:hi * A.b].copy()


def dot_range(u: BlockVector, v: BlockVector, lo: int, hi: int, init: float = 0.0) -> float:
    """Per-block sequential dot products over ``[lo, hi)``, folded in ascending order.

    Starting from ``init`` makes range-splitting exact:
    ``dot_range(u, v, r, N, init=dot_range(u, v, 0, r)) == dot_range(u, v, 0, N)``.
    """
    _check_rows(lo, hi, u.N)
    out = np.zeros(u.N)
    block_dots(u.data, v.data, u.b, lo, hi, out)
    return float(fold(float(init), out, lo, hi))


def axpy_range(y: BlockVector, x: BlockVector, alpha: float, lo: int, hi: int) -> BlockVector:
    """``y <- y + alpha x`` on block rows ``[lo, hi)``."""
    _check_rows(lo, hi, y.N)
    cg_step_x_rows(y.data, x.data, float(alpha), y.b, lo, hi)
    return y


def xpay_range(s: BlockVector, r: BlockVector, beta: float, lo: int, hi: int) -> BlockVector:
    """``s <- r + beta s`` on block rows ``[lo, hi)``."""
    _check_rows(lo, hi, s.N)
    cg_direction_rows(s.data, r.data, float(beta), s.b, lo, hi)
    return s
