"""Seeded random streams for the jitted walk kernels.

The generator is xoshiro256** with 256 bits of state. A stream is keyed by
``(seed, stream)``: the state is produced by ``numpy.random.SeedSequence``
with ``spawn_key=(stream,)``, so replicas get independent, reproducible
streams without any jump arithmetic.

Bounded integers use Lemire's multiply-shift with rejection, which is
exactly uniform on ``[0, n)`` for ``n < 2**32``.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import uint64

_MASK32 = 0xFFFFFFFF


@numba.njit(inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@numba.njit(inline="always")
def next_u64(state):
    result = _rotl(state[1] * uint64(5), 7) * uint64(9)
    t = state[1] << uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@numba.njit(inline="always")
def bounded(state, n):
    """Uniform integer in ``[0, n)``; ``n`` must be below 2**32."""
    n32 = uint64(n)
    x = next_u64(state) >> uint64(32)
    prod = x * n32
    low = prod & uint64(_MASK32)
    if low < n32:
        threshold = (uint64(_MASK32 + 1) - n32) % n32
        while low < threshold:
            x = next_u64(state) >> uint64(32)
            prod = x * n32
            low = prod & uint64(_MASK32)
    return np.int64(prod >> uint64(32))


@numba.njit(inline="always")
def uniform01(state):
    return np.float64(next_u64(state) >> uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit
def _draw_bounded(state, n, size):
    out = np.empty(size, dtype=np.int64)
    for k in range(size):
        out[k] = bounded(state, n)
    return out


class RngStream:
    """Mutable generator state for one replica.

    The same ``(seed, stream)`` pair always reproduces the same draws.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.state = ss.generate_state(4, np.uint64)
        if not self.state.any():
            self.state[0] = 1

    def integers(self, n: int, size: int) -> np.ndarray:
        if not 0 < n < 2**32:
            raise ValueError("bound must be in (0, 2**32)")
        return _draw_bounded(self.state, n, size)

    def integer(self, n: int) -> int:
        return int(self.integers(n, 1)[0])

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"
