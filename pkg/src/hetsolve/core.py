"""Block-structured storage, partition arithmetic and the transfer ledger."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError

__all__ = [
    "BlockVector",
    "BlockedSPDMatrix",
    "CholeskyPlan",
    "Direction",
    "Partition",
    "SolverConfig",
    "TransferEntry",
    "TransferKind",
    "TransferLedger",
    "block_index",
    "cholesky_border",
    "make_cholesky_plan",
    "num_blocks",
    "partition_for_fraction",
]

DOUBLE = 8


def num_blocks(N: int) -> int:
    return N * (N + 1) // 2


def block_index(i: int, j: int, N: int | None = None) -> int:
    """Triangular offset of block ``(i, j)``, ``j <= i``, in row-major packed order."""
    if j < 0 or j > i or (N is not None and i >= N):
        raise IndexError(f"block ({i}, {j}) is outside the lower triangle" + (f" of N={N}" if N else ""))
    return i * (i + 1) // 2 + j


class BlockedSPDMatrix:
    """Symmetric matrix stored as its lower-triangular ``b x b`` blocks.

    ``blocks`` has shape ``(N(N+1)/2, b, b)``; block ``(i, j)`` lives at
    ``block_index(i, j)``.  Rows and columns ``>= n`` form an identity
    extension so that the padded ``N*b`` matrix stays SPD.
    """

    def __init__(self, n: int, b: int, blocks: np.ndarray | None = None):
        if n < 1 or b < 1:
            raise ConfigError(f"n and b must be positive (got n={n}, b={b})")
        self.n = int(n)
        self.b = int(b)
        self.N = -(-self.n // self.b)
        shape = (num_blocks(self.N), self.b, self.b)
        if blocks is None:
            blocks = np.zeros(shape)
            self._set_padding(blocks)
        else:
            blocks = np.ascontiguousarray(blocks, dtype=np.float64)
            if blocks.shape != shape:
                raise ConfigError(f"blocks must have shape {shape}, got {blocks.shape}")
        self.blocks = blocks

    @property
    def pad(self) -> int:
        return self.N * self.b - self.n

    def _set_padding(self, blocks):
        # only the last block row can hold padding; block column N-1 has no
        # stored off-diagonal blocks
        if self.pad == 0:
            return
        last = self.N - 1
        lo = self.n - last * self.b
        for j in range(last):
            blocks[block_index(last, j), lo:, :] = 0.0
        d = blocks[block_index(last, last)]
        d[lo:, :] = 0.0
        d[:, lo:] = 0.0
        d[lo:, lo:] = np.eye(self.pad)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.blocks[block_index(i, j, self.N)]

    def element(self, p: int, q: int) -> float:
        if not (0 <= p < self.n and 0 <= q < self.n):
            raise IndexError(f"element ({p}, {q}) outside a {self.n}x{self.n} matrix")
        if p < q:
            p, q = q, p
        i, pp = divmod(p, self.b)
        j, qq = divmod(q, self.b)
        return float(self.blocks[block_index(i, j), pp, qq])

    @classmethod
    def from_dense(cls, dense, b: int) -> "BlockedSPDMatrix":
        """Pack the lower triangle of a dense symmetric matrix."""
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise ConfigError("dense matrix must be square")
        m = cls(n, b)
        padded = np.eye(m.N * b)
        padded[:n, :n] = dense
        for i in range(m.N):
            for j in range(i + 1):
                m.blocks[block_index(i, j)] = padded[i * b:(i + 1) * b, j * b:(j + 1) * b]
        return m

    def to_dense(self, padded: bool = False) -> np.ndarray:
        """Unpack to a full symmetric matrix, mirroring lower triangles only."""
        b, N = self.b, self.N
        out = np.zeros((N * b, N * b))
        for i in range(N):
            for j in range(i):
                blk = self.blocks[block_index(i, j)]
                out[i * b:(i + 1) * b, j * b:(j + 1) * b] = blk
                out[j * b:(j + 1) * b, i * b:(i + 1) * b] = blk.T
            d = np.tril(self.blocks[block_index(i, i)])
            out[i * b:(i + 1) * b, i * b:(i + 1) * b] = d + np.tril(d, -1).T
        return out if padded else out[: self.n, : self.n]

    def lower_dense(self, padded: bool = False) -> np.ndarray:
        """Dense lower-triangular view (e.g. the Cholesky factor after factorization)."""
        b, N = self.b, self.N
        out = np.zeros((N * b, N * b))
        for i in range(N):
            for j in range(i):
                out[i * b:(i + 1) * b, j * b:(j + 1) * b] = self.blocks[block_index(i, j)]
            out[i * b:(i + 1) * b, i * b:(i + 1) * b] = np.tril(self.blocks[block_index(i, i)])
        return out if padded else out[: self.n, : self.n]

    def copy(self) -> "BlockedSPDMatrix":
        return BlockedSPDMatrix(self.n, self.b, self.blocks.copy())

    def __repr__(self):
        return f"BlockedSPDMatrix(n={self.n}, b={self.b}, N={self.N})"


class BlockVector:
    """Length-``n`` vector padded with zeros to ``N*b`` entries."""

    def __init__(self, n: int, b: int, data: np.ndarray | None = None):
        self.n = int(n)
        self.b = int(b)
        self.N = -(-self.n // self.b)
        if data is None:
            data = np.zeros(self.N * self.b)
        else:
            data = np.ascontiguousarray(data, dtype=np.float64)
            if data.shape != (self.N * self.b,):
                raise ConfigError(f"vector data must have length {self.N * self.b}")
        self.data = data

    @classmethod
    def from_array(cls, values, b: int) -> "BlockVector":
        values = np.asarray(values, dtype=np.float64).ravel()
        v = cls(values.size, b)
        v.data[: values.size] = values
        return v

    @property
    def values(self) -> np.ndarray:
        return self.data[: self.n]

    def rows(self, lo: int, hi: int) -> np.ndarray:
        return self.data[lo * self.b:hi * self.b]

    def copy(self) -> "BlockVector":
        return BlockVector(self.n, self.b, self.data.copy())

    def __repr__(self):
        return f"BlockVector(n={self.n}, b={self.b})"


def _check_fraction(f: float) -> float:
    f = float(f)
    if not (0.0 <= f <= 1.0):
        raise ConfigError(f"split fraction must lie in [0, 1], got {f}")
    return f


@dataclass(frozen=True)
class Partition:
    """Row split for CG: block rows ``[0, split_row)`` on B, ``[split_row, N)`` on A."""

    split_row: int
    fraction: float
    N: int

    def owner(self, block_row: int) -> "ExecutorRole":
        return ExecutorRole.B if block_row < self.split_row else ExecutorRole.A

    @property
    def b_rows(self) -> tuple[int, int]:
        return (0, self.split_row)

    @property
    def a_rows(self) -> tuple[int, int]:
        return (self.split_row, self.N)


def partition_for_fraction(f: float, N: int) -> Partition:
    f = _check_fraction(f)
    if N < 1:
        raise ConfigError("need at least one block row")
    return Partition(min(N, math.floor(f * N + 0.5)), f, N)


def cholesky_border(f: float, j: int, N: int) -> int:
    """First block row owned by B while factoring column ``j``.

    The trailing update of column ``j`` touches ``i - j`` blocks in row ``i``.
    B receives the longest bottom rows whose total stays within ``f`` of all
    trailing blocks.
    """
    f = _check_fraction(f)
    if not 0 <= j < N:
        raise IndexError(f"column {j} outside [0, {N})")
    t = N - 1 - j
    budget = f * (t * (t + 1) // 2)
    beta, below = N, 0
    while beta - 1 >= j + 1 and below + (beta - 1 - j) <= budget:
        beta -= 1
        below += beta - j
    return beta


@dataclass
class CholeskyPlan:
    fraction: float
    N: int
    borders: list[int]
    shifts: list[tuple[int, int]] = field(default_factory=list)

    def b_blocks(self) -> int:
        """Trailing-update blocks assigned to B over the whole factorization."""
        return sum(sum(i - j for i in range(beta, self.N)) for j, beta in enumerate(self.borders))

    def total_blocks(self) -> int:
        return sum((self.N - 1 - j) * (self.N - j) // 2 for j in range(self.N))

    def realized_fraction(self) -> float:
        total = self.total_blocks()
        return self.b_blocks() / total if total else 0.0


def make_cholesky_plan(f: float, N: int) -> CholeskyPlan:
    borders = []
    for j in range(N):
        beta = cholesky_border(f, j, N)
        if borders and beta < borders[-1]:
            beta = borders[-1]
        borders.append(beta)
    shifts = [(j, borders[j + 1] - borders[j]) for j in range(N - 1) if borders[j + 1] > borders[j]]
    return CholeskyPlan(f, N, borders, shifts)


class ExecutorRole(str, Enum):
    A = "A"  # host role, "lower part"
    B = "B"  # accelerator role, "upper part"

    def other(self) -> "ExecutorRole":
        return ExecutorRole.B if self is ExecutorRole.A else ExecutorRole.A


class TransferKind(str, Enum):
    SCALAR = "scalar"
    SUBVECTOR = "subvector"
    BLOCK = "block"
    BLOCK_ROW = "block_row"
    INITIAL = "initial_matrix"
    RESULT = "result"


class Direction(str, Enum):
    A_TO_B = "A->B"
    B_TO_A = "B->A"
    BOTH = "both"

    @classmethod
    def between(cls, src, dst) -> "Direction":
        if src == dst:
            raise ValueError("transfer within one memory space")
        return cls.A_TO_B if ExecutorRole(src) is ExecutorRole.A else cls.B_TO_A


@dataclass(frozen=True)
class TransferEntry:
    kind: TransferKind
    direction: Direction
    bytes: int
    step: int


class TransferLedger:
    """Append-only record of every cross-space transfer."""

    def __init__(self):
        self._entries: list[TransferEntry] = []

    def record(self, kind, direction, nbytes: int, step: int = -1) -> TransferEntry:
        e = TransferEntry(TransferKind(kind), Direction(direction), int(nbytes), int(step))
        self._entries.append(e)
        return e

    @property
    def entries(self) -> tuple[TransferEntry, ...]:
        return tuple(self._entries)

    def __len__(self):
        return len(self._entries)

    def select(self, kind=None, direction=None, step=None) -> list[TransferEntry]:
        return [
            e for e in self._entries
            if (kind is None or e.kind is TransferKind(kind))
            and (direction is None or e.direction is Direction(direction))
            and (step is None or e.step == step)
        ]

    def count(self, kind=None, direction=None, step=None) -> int:
        return len(self.select(kind, direction, step))

    def total_bytes(self, kind=None, direction=None) -> int:
        return sum(e.bytes for e in self.select(kind, direction))

    def summary(self) -> dict[str, int]:
        """Bytes per kind, plus ``"total"``."""
        out = Counter()
        for e in self._entries:
            out[e.kind.value] += e.bytes
        res = {k.value: out.get(k.value, 0) for k in TransferKind}
        res["total"] = sum(out.values())
        return res


MODES = ("auto", "hetero", "homogeneous")


@dataclass
class SolverConfig:
    eps: float = 1e-6
    max_iters: int = 1000
    recompute_interval: int = 50
    fraction: float = 0.0
    block_size: int = 32
    workers_a: int = 1
    workers_b: int = 1
    slowdown_a: float = 1.0
    slowdown_b: float = 1.0
    seed: int = 0
    # "auto": fractions 0 and 1 run on a single executor, anything else is split
    mode: str = "auto"
    # optional per-worker throughput cap in GFLOP/s (device emulation)
    pace_gflops: float | None = None

    def __post_init__(self):
        _check_fraction(self.fraction)
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be non-negative")
        if self.recompute_interval < 0:
            raise ConfigError("recompute_interval must be non-negative (0 disables)")
        if self.block_size < 1:
            raise ConfigError("block size must be positive")
        if self.workers_a < 1 or self.workers_b < 1:
            raise ConfigError("each executor needs at least one worker")
        if self.slowdown_a < 1.0 or self.slowdown_b < 1.0:
            raise ConfigError("slowdown factors must be >= 1.0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.pace_gflops is not None and not self.pace_gflops > 0:
            raise ConfigError("pace_gflops must be positive")

    @property
    def heterogeneous(self) -> bool:
        if self.mode == "auto":
            return 0.0 < self.fraction < 1.0
        return self.mode == "hetero"

    @property
    def home(self) -> ExecutorRole:
        """Executor used in homogeneous mode."""
        return ExecutorRole.B if self.fraction >= 0.5 else ExecutorRole.A
