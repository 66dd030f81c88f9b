"""
Packed block storage and a blocked Cholesky solve
=================================================

Only the lower triangle of a symmetric matrix is stored, as N(N+1)/2 square
blocks.  This script builds a covariance matrix, looks at the layout, then
factors it with the trailing update shared between two executors.
"""

import numpy as np

from hetsolve import (
    SolverConfig,
    block_index,
    factorize,
    generate_rhs,
    generate_spd,
    make_cholesky_plan,
    solve_spd,
)

# a squared-exponential kernel matrix over a damped sinusoid trajectory
n, b = 300, 64
A = generate_spd(n, b, seed=1)
print(A)
print("stored blocks:", A.blocks.shape[0], "for N =", A.N, "block rows")
print("block (3, 2) lives at offset", block_index(3, 2))

# reads above the diagonal are served from the mirrored lower block
print("A[10, 250] == A[250, 10]:", A.element(10, 250) == A.element(250, 10))

# the last block row is padded with an identity so the padded matrix stays SPD
print("padding rows:", A.pad)
print(A.to_dense(padded=True)[-3:, -3:])

# B gets the bottom rows of every trailing update, at most 70% of its blocks
plan = make_cholesky_plan(0.7, A.N)
print("border per column:", plan.borders, "realised share on B: %.3f" % plan.realized_fraction())

L, _, stats = factorize(A.copy(), SolverConfig(block_size=b, fraction=0.7))
Ld = L.lower_dense()
D = A.to_dense()
print("reconstruction error: %.2e" % (np.linalg.norm(D - Ld @ Ld.T) / np.linalg.norm(D)))
print("transfers:", stats.ledger.summary())

# a full solve: factor, then forward and back substitution on one executor
rhs = generate_rhs(n, b, seed=1)
x, stats = solve_spd(A.copy(), rhs, SolverConfig(block_size=b, fraction=0.7))
print("true residual: %.2e" % stats.true_residual)
