"""Two executors with disjoint memory spaces and an explicit transfer ledger.

Each executor owns a thread pool and a private copy of every registered
object.  Validity is tracked per unit (a block for matrices, a block row for
vectors): a write makes the writer's copy the only valid one, and a transfer
copies data and marks the destination valid.  Tasks that name a region not
valid in their executor's space fail with :class:`ResidencyError`.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import DOUBLE, Direction, ExecutorRole, SolverConfig, TransferKind, TransferLedger
from .errors import ResidencyError

log = logging.getLogger(__name__)

__all__ = ["Executor", "ExecutorRole", "MemorySpace", "Region", "Runtime"]


@dataclass(frozen=True)
class Region:
    name: str
    lo: int
    hi: int

    def __str__(self):
        return f"{self.name}[{self.lo}:{self.hi})"


class _Object:
    """Registered data object: one array per memory space plus validity flags."""

    def __init__(self, name, kind, template: np.ndarray, unit: int, logical: int):
        self.name = name
        self.kind = kind  # "matrix" (unit = block) or "vector" (unit = block row)
        self.template = template
        self.unit = unit  # elements per unit
        self.logical = logical  # logical (unpadded) element count, vectors only
        self.units = template.shape[0] if kind == "matrix" else template.size // unit

    def elements(self, lo, hi):
        if self.kind == "matrix":
            return (hi - lo) * self.unit
        return max(0, min(hi * self.unit, self.logical) - lo * self.unit)

    def view(self, arr, lo, hi):
        if self.kind == "matrix":
            return arr[lo:hi]
        return arr[lo * self.unit:hi * self.unit]


class MemorySpace:
    def __init__(self, owner: ExecutorRole):
        self.owner = owner
        self.arrays: dict[str, np.ndarray] = {}
        self.valid: dict[str, np.ndarray] = {}
        self.bytes_received = 0

    def __getitem__(self, name) -> np.ndarray:
        return self.arrays[name]

    def is_resident(self, region: Region) -> bool:
        v = self.valid.get(region.name)
        return v is not None and bool(v[region.lo:region.hi].all())

    def require(self, region: Region):
        if region.hi > region.lo and not self.is_resident(region):
            raise ResidencyError(f"region {region} is not resident on executor {self.owner.value}")


class Executor:
    """A worker pool with an optional throughput model.

    Each task chunk runs on one worker.  With ``pace_gflops`` set, a chunk of
    ``flops`` work occupies its worker for ``slowdown * flops / pace`` seconds
    (at least its real duration); otherwise it occupies ``slowdown`` times its
    measured duration.
    """

    def __init__(self, role: ExecutorRole, workers: int = 1, slowdown: float = 1.0, pace_gflops=None):
        self.role = ExecutorRole(role)
        self.workers = int(workers)
        self.slowdown = float(slowdown)
        self.pace = None if pace_gflops is None else float(pace_gflops) * 1e9
        self.space = MemorySpace(self.role)
        self.tasks_run = 0
        self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix=f"exec-{self.role.value}")
        self._pending: list[Future] = []
        self._lock = threading.Lock()
        self._local = threading.local()

    def _run(self, fn, args, flops, submitted):
        t0 = time.perf_counter()
        out = fn(*args)
        now = time.perf_counter()
        if self.pace:
            # the modelled device starts when the chunk is queued or its worker frees up,
            # independent of how the host OS schedules this thread
            start = max(submitted, getattr(self._local, "busy_until", 0.0))
            deadline = start + self.slowdown * flops / self.pace
        else:
            deadline = t0 + self.slowdown * (now - t0)
        if deadline > now:
            time.sleep(deadline - now)
        self._local.busy_until = max(deadline, now)
        return out

    def submit(self, fn, args, flops: float = 0.0) -> Future:
        with self._lock:
            self.tasks_run += 1
        fut = self._pool.submit(self._run, fn, args, flops, time.perf_counter())
        self._pending.append(fut)
        return fut

    def drain(self) -> list[Future]:
        pending, self._pending = self._pending, []
        return pending

    def shutdown(self):
        self._pool.shutdown(wait=True)


class Runtime:
    """Orchestrator-side view of both executors, their memory spaces and the ledger."""

    def __init__(self, cfg: SolverConfig | None = None, *, workers=None, slowdown=None, pace_gflops=None):
        cfg = cfg or SolverConfig()
        workers = workers or {ExecutorRole.A: cfg.workers_a, ExecutorRole.B: cfg.workers_b}
        slowdown = slowdown or {ExecutorRole.A: cfg.slowdown_a, ExecutorRole.B: cfg.slowdown_b}
        pace = cfg.pace_gflops if pace_gflops is None else pace_gflops
        self.executors = {
            r: Executor(r, workers[r], slowdown[r], pace) for r in (ExecutorRole.A, ExecutorRole.B)
        }
        self.ledger = TransferLedger()
        self._objects: dict[str, _Object] = {}

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def shutdown(self):
        for ex in self.executors.values():
            ex.shutdown()

    def __getitem__(self, role) -> Executor:
        return self.executors[ExecutorRole(role)]

    def space(self, role) -> MemorySpace:
        return self.executors[ExecutorRole(role)].space

    # -- registration -----------------------------------------------------

    def _register(self, obj: _Object, data, resident):
        if obj.name in self._objects:
            raise ValueError(f"object {obj.name!r} already registered")
        self._objects[obj.name] = obj
        for role, ex in self.executors.items():
            here = role in resident
            if here and data is not None and role is resident[0]:
                arr = data
            elif here and data is not None:
                arr = data.copy()
            else:
                arr = np.zeros_like(obj.template)
            ex.space.arrays[obj.name] = arr
            ex.space.valid[obj.name] = np.full(obj.units, here or data is None)
        return obj

    def add_matrix(self, name, blocks: np.ndarray, home) -> None:
        """Register packed blocks as resident on ``home`` only (no copy)."""
        b = blocks.shape[1]
        self._register(_Object(name, "matrix", blocks, b * b, blocks.size), blocks, [ExecutorRole(home)])

    def add_vector(self, name, data: np.ndarray, b: int, n: int, home=None) -> None:
        """Register a vector resident on ``home`` only (no copy)."""
        self._register(_Object(name, "vector", data, b, n), data, [ExecutorRole(home)])

    def add_zero_vector(self, name, length: int, b: int, n: int) -> None:
        """Zero-initialised on both sides; each executor fills its own copy, no transfer."""
        template = np.zeros(length)
        self._register(_Object(name, "vector", template, b, n), None, list(self.executors))

    # -- tasks --------------------------------------------------------------

    def submit(self, role, fn, args, *, flops=0.0, reads=(), writes=()) -> Future:
        role = ExecutorRole(role)
        space = self.executors[role].space
        for reg in (*reads, *writes):
            space.require(reg)
        other = self.executors[role.other()].space
        for reg in writes:
            if reg.hi > reg.lo:
                other.valid[reg.name][reg.lo:reg.hi] = False
        return self.executors[role].submit(fn, args, flops)

    def barrier(self) -> list:
        """Wait for every outstanding task on both executors; re-raise the first failure."""
        results, first = [], None
        for ex in self.executors.values():
            for fut in ex.drain():
                try:
                    results.append(fut.result())
                except BaseException as exc:  # noqa: BLE001 - re-raised below
                    first = first or exc
        if first is not None:
            raise first
        return results

    # -- transfers ----------------------------------------------------------

    def _copy(self, obj, lo, hi, src, dst):
        s, d = self.space(src), self.space(dst)
        s.require(Region(obj.name, lo, hi))
        obj.view(d.arrays[obj.name], lo, hi)[...] = obj.view(s.arrays[obj.name], lo, hi)
        d.valid[obj.name][lo:hi] = True
        nbytes = obj.elements(lo, hi) * DOUBLE
        d.bytes_received += nbytes
        return nbytes

    def transfer(self, name, lo, hi, src, dst, kind, step=-1):
        """Copy units ``[lo, hi)`` of ``name`` from ``src`` to ``dst`` and log one entry."""
        if name not in self._objects:
            raise KeyError(f"unknown object {name!r}")
        obj = self._objects[name]
        if not 0 <= lo <= hi <= obj.units:
            raise IndexError(f"interval [{lo}, {hi}) outside object {name!r}")
        src, dst = ExecutorRole(src), ExecutorRole(dst)
        nbytes = self._copy(obj, lo, hi, src, dst)
        return self.ledger.record(kind, Direction.between(src, dst), nbytes, step)

    def exchange(self, name, split, kind=TransferKind.SUBVECTOR, step=-1):
        """Swap halves of a vector split at block row ``split``; logged as one event."""
        obj = self._objects[name]
        nbytes = self._copy(obj, 0, split, ExecutorRole.B, ExecutorRole.A)
        nbytes += self._copy(obj, split, obj.units, ExecutorRole.A, ExecutorRole.B)
        return self.ledger.record(kind, Direction.BOTH, nbytes, step)

    def transfer_scalar(self, value: float, src, dst, step=-1) -> float:
        self.space(dst).bytes_received += DOUBLE
        self.ledger.record(TransferKind.SCALAR, Direction.between(src, dst), DOUBLE, step)
        return float(value)


def split_rows(lo: int, hi: int, parts: int, weight=None) -> list[tuple[int, int]]:
    """Split ``[lo, hi)`` into at most ``parts`` contiguous chunks of similar weight."""
    if hi <= lo:
        return []
    parts = max(1, min(parts, hi - lo))
    if parts == 1:
        return [(lo, hi)]
    w = np.ones(hi - lo) if weight is None else np.array([weight(i) for i in range(lo, hi)], dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(w)])
    total = cum[-1]
    cuts = [lo]
    for k in range(1, parts):
        c = int(np.searchsorted(cum, total * k / parts, side="left"))
        c = min(max(c, cuts[-1] - lo + 1), hi - lo - (parts - k))
        cuts.append(lo + c)
    cuts.append(hi)
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]
