"""Deterministic SPD test matrices: squared-exponential kernels over a noisy trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BlockedSPDMatrix, BlockVector, block_index
from .errors import ConfigError

__all__ = ["KernelParams", "generate_inputs", "generate_rhs", "generate_spd", "median_length_scale"]

_SUBSAMPLE = 512
_OMEGA = 2.0
_DAMPING = 0.05
_SPAN = 20.0
_NOISE = 0.05


@dataclass(frozen=True)
class KernelParams:
    signal_var: float = 1.0
    length_scale: float | None = None  # None: median pairwise distance rule
    noise_var: float = 1e-2
    dim: int = 2

    def __post_init__(self):
        if not self.signal_var > 0 or not self.noise_var > 0:
            raise ConfigError("signal and noise variances must be positive")
        if self.length_scale is not None and not self.length_scale > 0:
            raise ConfigError("length scale must be positive")
        if self.dim < 1:
            raise ConfigError("input dimension must be at least 1")


def _stream(seed: int, stream: int) -> np.random.Generator:
    # Philox is counter based: (seed, stream) selects an independent sequence
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, stream]))


def generate_inputs(n: int, d: int = 2, seed: int = 0) -> np.ndarray:
    """``n`` points of a damped oscillator trajectory with measurement noise, shape ``(n, d)``.

    Column 0 is the (jittered) time stamp; the remaining columns are phase-shifted
    damped sinusoids plus uniform noise.
    """
    if n < 1:
        raise ConfigError("need at least one input point")
    if d < 1:
        raise ConfigError("input dimension must be at least 1")
    u = _stream(seed, 0).random((n, d))
    t = _SPAN * (np.arange(n) + u[:, 0]) / n
    pts = np.empty((n, d))
    pts[:, 0] = t
    for k in range(1, d):
        phase = (k - 1) * np.pi / 2
        pts[:, k] = np.exp(-_DAMPING * t) * np.sin(_OMEGA * t + phase) + _NOISE * (2.0 * u[:, k] - 1.0)
    return pts


def median_length_scale(points: np.ndarray) -> float:
    """Median pairwise distance over an evenly spaced subsample of at most 512 points."""
    n = len(points)
    idx = np.unique(np.linspace(0, n - 1, min(n, _SUBSAMPLE)).round().astype(np.int64))
    sub = points[idx]
    if len(sub) < 2:
        return 1.0
    diff = sub[:, None, :] - sub[None, :, :]
    dist = np.sqrt((diff * diff).sum(-1))[np.triu_indices(len(sub), 1)]
    med = float(np.median(dist))
    return med if med > 0 else 1.0


def _sq_dist(P, Q):
    # (p - q)^2 summed over coordinates: symmetric bit for bit in (P, Q)
    diff = P[:, None, :] - Q[None, :, :]
    return (diff * diff).sum(-1)


def generate_spd(n: int, b: int, params: KernelParams | None = None, seed: int = 0) -> BlockedSPDMatrix:
    """Kernel matrix ``sf2 * exp(-|x_p - x_q|^2 / (2 l^2)) + sn2 * delta_pq`` in packed blocks."""
    params = params or KernelParams()
    pts = generate_inputs(n, params.dim, seed)
    ell = params.length_scale or median_length_scale(pts)
    M = BlockedSPDMatrix(n, b)
    scale = -1.0 / (2.0 * ell * ell)
    for i in range(M.N):
        rlo, rhi = i * b, min((i + 1) * b, n)
        for j in range(i + 1):
            clo, chi = j * b, min((j + 1) * b, n)
            K = params.signal_var * np.exp(_sq_dist(pts[rlo:rhi], pts[clo:chi]) * scale)
            if i == j:
                K[np.diag_indices(rhi - rlo)] += params.noise_var
            M.blocks[block_index(i, j), : rhi - rlo, : chi - clo] = K
    return M


def generate_rhs(n: int, b: int, seed: int = 0) -> BlockVector:
    """Right-hand side with entries uniform in ``[-1, 1)``."""
    return BlockVector.from_array(2.0 * _stream(seed, 1).random(n) - 1.0, b)
