"""Independent reference implementations used by the tests.

Pure Python loops over dense arrays; nothing here touches the packed layout
except through ``to_dense``/``lower_dense``.
"""

import math

import numpy as np


def naive_gemm(C, P, Q):
    """C - P Q^T with the same ascending-k accumulation the kernels promise."""
    C = np.array(C, dtype=float)
    b = C.shape[0]
    out = C.copy()
    for i in range(b):
        for j in range(b):
            acc = 0.0
            for k in range(P.shape[1]):
                acc += P[i, k] * Q[j, k]
            out[i, j] = C[i, j] - acc
    return out


def naive_syrk(C, P):
    out = np.array(C, dtype=float)
    b = out.shape[0]
    for i in range(b):
        for j in range(i + 1):
            acc = 0.0
            for k in range(P.shape[1]):
                acc += P[i, k] * P[j, k]
            out[i, j] = C[i, j] - acc
    return out


def naive_symv(dense, x, b):
    """Row-wise y = A x, each row accumulated over ascending columns."""
    n = dense.shape[0]
    y = np.zeros(n)
    for p in range(n):
        acc = 0.0
        for q in range(n):
            acc += dense[p, q] * x[q]
        y[p] = acc
    return y


def crout(A):
    """Unblocked scalar Cholesky-Crout; returns the lower factor."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        s = A[j, j] - sum(L[j, k] * L[j, k] for k in range(j))
        if s <= 0:
            raise ValueError(f"not positive definite at {j}")
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - sum(L[i, k] * L[j, k] for k in range(j))) / L[j, j]
    return L


def crout_fast(A):
    """Same recurrence vectorised over rows, for larger oracle runs."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        s = A[j, j] - L[j, :j] @ L[j, :j]
        L[j, j] = math.sqrt(s)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def gauss_solve(A, rhs):
    """Gaussian elimination with partial pivoting."""
    M = np.array(A, dtype=float)
    x = np.array(rhs, dtype=float)
    n = len(x)
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        M[[k, p]], x[[k, p]] = M[[p, k]], x[[p, k]]
        for i in range(k + 1, n):
            m = M[i, k] / M[k, k]
            M[i, k:] -= m * M[k, k:]
            x[i] -= m * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - M[k, k + 1:] @ x[k + 1:]) / M[k, k]
    return x


def random_spd(n, rng, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.geomspace(1.0, cond, n)
    A = (Q * eig) @ Q.T
    return (A + A.T) / 2
