import threading
import time

import numpy as np
import pytest

from hetsolve import ResidencyError, SolverConfig, TransferKind
from hetsolve.core import Direction, ExecutorRole, block_index, num_blocks
from hetsolve.executor import Region, Runtime, split_rows

A, B = ExecutorRole.A, ExecutorRole.B


@pytest.fixture
def rt():
    with Runtime(SolverConfig(workers_a=2, workers_b=2)) as r:
        yield r


def _touch(arr, lo, hi):
    arr[lo:hi] += 1.0


def test_submit_resident(rt):
    rt.add_vector("v", np.zeros(8), 2, 8, A)
    fut = rt.submit(A, _touch, (rt.space(A)["v"], 0, 4), writes=[Region("v", 0, 2)])
    rt.barrier()
    assert fut.done()
    assert np.array_equal(rt.space(A)["v"][:4], np.ones(4))


def test_submit_non_resident(rt):
    rt.add_vector("v", np.zeros(8), 2, 8, A)
    with pytest.raises(ResidencyError):
        rt.submit(B, _touch, (rt.space(B)["v"], 0, 4), reads=[Region("v", 0, 2)])


def test_write_invalidates_other_copy(rt):
    rt.add_zero_vector("v", 8, 2, 8)
    rt.submit(A, _touch, (rt.space(A)["v"], 0, 2), writes=[Region("v", 0, 1)])
    rt.barrier()
    assert rt.space(A).is_resident(Region("v", 0, 4))
    assert not rt.space(B).is_resident(Region("v", 0, 1))
    assert rt.space(B).is_resident(Region("v", 1, 4))
    rt.transfer("v", 0, 1, A, B, TransferKind.SUBVECTOR)
    assert rt.space(B).is_resident(Region("v", 0, 4))
    assert np.array_equal(rt.space(B)["v"], rt.space(A)["v"])


def test_concurrent_tasks_and_barrier(rt):
    rt.add_zero_vector("v", 8, 2, 8)
    started = threading.Barrier(2, timeout=5)

    def task(arr, lo, hi):
        started.wait()  # both executors must be running at once
        arr[lo:hi] = 1.0

    rt.submit(A, task, (rt.space(A)["v"], 0, 4), writes=[Region("v", 0, 2)])
    rt.submit(B, task, (rt.space(B)["v"], 4, 8), writes=[Region("v", 2, 4)])
    rt.barrier()
    assert rt.space(A)["v"][:4].all() and rt.space(B)["v"][4:].all()


def test_barrier_reraises(rt):
    def boom():
        raise FloatingPointError("x")

    rt.submit(A, boom, ())
    with pytest.raises(FloatingPointError):
        rt.barrier()


def test_transfer_byte_counts(rt):
    b, N = 128, 3
    rt.add_matrix("L", np.zeros((num_blocks(N), b, b)), A)
    rt.transfer_scalar(1.5, B, A)
    e = rt.transfer("L", 0, 1, A, B, TransferKind.BLOCK)
    assert e.bytes == 131072 and e.direction is Direction.A_TO_B
    for i in range(N):
        e = rt.transfer("L", block_index(i, 0), block_index(i, i) + 1, A, B, TransferKind.BLOCK_ROW)
        assert e.bytes == (i + 1) * b * b * 8
    scal = rt.ledger.select(TransferKind.SCALAR)
    assert len(scal) == 1 and scal[0].bytes == 8 and scal[0].direction is Direction.B_TO_A


def test_vector_transfer_counts_logical_elements(rt):
    rt.add_vector("v", np.zeros(8), 4, 6, A)
    assert rt.transfer("v", 0, 2, A, B, TransferKind.INITIAL).bytes == 6 * 8


def test_exchange_is_one_event(rt):
    rt.add_zero_vector("s", 12, 3, 12)
    e = rt.exchange("s", 1)
    assert e.direction is Direction.BOTH and e.bytes == 12 * 8
    assert rt.ledger.count(TransferKind.SUBVECTOR) == 1


def test_transfer_from_stale_source(rt):
    rt.add_vector("v", np.zeros(8), 2, 8, A)
    with pytest.raises(ResidencyError):
        rt.transfer("v", 0, 1, B, A, TransferKind.SUBVECTOR)


def test_slowdown_stretches_tasks():
    with Runtime(SolverConfig(slowdown_b=3.0)) as rt:
        t0 = time.perf_counter()
        rt.submit(B, time.sleep, (0.02,))
        rt.barrier()
        assert time.perf_counter() - t0 >= 0.055


def test_pace_models_throughput():
    with Runtime(SolverConfig(pace_gflops=1.0, workers_a=1)) as rt:
        t0 = time.perf_counter()
        for _ in range(3):
            rt.submit(A, lambda: None, (), flops=1e7)  # 10 ms each on one worker
        rt.barrier()
        assert time.perf_counter() - t0 >= 0.029


def test_split_rows():
    assert split_rows(0, 0, 4) == []
    assert split_rows(2, 5, 1) == [(2, 5)]
    chunks = split_rows(0, 10, 4)
    assert chunks[0][0] == 0 and chunks[-1][1] == 10 and len(chunks) == 4
    assert all(a[1] == b[0] for a, b in zip(chunks, chunks[1:]))
    assert len(split_rows(0, 2, 8)) == 2
    w = split_rows(0, 10, 2, weight=lambda i: i)
    assert w[0][1] > 5  # heavier tail rows get a shorter chunk
