"""Heterogeneous blocked CG and Cholesky solvers for dense SPD systems."""

from .bspd import load_matrix, load_vector, save_matrix, save_vector
from .cg import CGStats, solve_cg
from .cholesky import CholeskyStats, back_substitute, factorize, forward_substitute, solve_spd
from .core import (
    BlockedSPDMatrix,
    BlockVector,
    CholeskyPlan,
    Partition,
    SolverConfig,
    TransferKind,
    TransferLedger,
    block_index,
    cholesky_border,
    make_cholesky_plan,
    partition_for_fraction,
)
from .errors import (
    ConfigError,
    FormatError,
    NotConverged,
    NotSPD,
    NumericalError,
    ResidencyError,
    SingularBlock,
    TruncatedFile,
    VersionMismatch,
)
from .genmat import KernelParams, generate_inputs, generate_rhs, generate_spd

__version__ = "0.1.0"
