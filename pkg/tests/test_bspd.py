import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetsolve import (
    BlockedSPDMatrix,
    FormatError,
    TruncatedFile,
    VersionMismatch,
    load_matrix,
    load_vector,
    save_matrix,
    save_vector,
)

HEADER = struct.calcsize("<4sBQQ")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_round_trip(tmp_path_factory, n, b, seed):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    M = BlockedSPDMatrix.from_dense(S + S.T, b)
    path = tmp_path_factory.mktemp("m") / "a.bspd"
    save_matrix(path, M)
    R = load_matrix(path)
    assert (R.n, R.b) == (M.n, M.b)
    assert R.blocks.tobytes() == M.blocks.tobytes()


@pytest.fixture
def saved(tmp_path):
    path = tmp_path / "m.bspd"
    save_matrix(path, BlockedSPDMatrix.from_dense(np.eye(10), 4))
    return path


def test_bad_magic(saved):
    data = bytearray(saved.read_bytes())
    data[:4] = b"XXXX"
    saved.write_bytes(bytes(data))
    with pytest.raises(FormatError) as info:
        load_matrix(saved)
    assert type(info.value) is FormatError


def test_version(saved):
    data = bytearray(saved.read_bytes())
    data[4] = 9
    saved.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch) as info:
        load_matrix(saved)
    assert info.value.found == 9


def test_truncated(saved):
    data = saved.read_bytes()
    saved.write_bytes(data[:-100])
    with pytest.raises(TruncatedFile) as info:
        load_matrix(saved)
    # whole-file sizes: header plus N(N+1)/2 blocks of b*b doubles
    assert info.value.expected == len(data) == HEADER + 6 * 16 * 8
    assert info.value.actual == len(data) - 100


def test_short_header(saved):
    saved.write_bytes(saved.read_bytes()[:7])
    with pytest.raises(TruncatedFile):
        load_matrix(saved)


def test_trailing_bytes(saved):
    saved.write_bytes(saved.read_bytes() + b"\0")
    with pytest.raises(FormatError):
        load_matrix(saved)


def test_distinct_kinds():
    kinds = {FormatError("x").kind, VersionMismatch(2, 1).kind, TruncatedFile(1, 0).kind}
    assert len(kinds) == 3


def test_vector_round_trip(tmp_path):
    v = np.random.default_rng(0).standard_normal(17)
    save_vector(tmp_path / "v.bin", v)
    assert np.array_equal(load_vector(tmp_path / "v.bin"), v)
