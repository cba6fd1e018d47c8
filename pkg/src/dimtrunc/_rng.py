"""Counter-based uniform stream.

Every draw is a pure function of ``(key, counter)``: the SplitMix64 finalizer
applied to ``key + (counter + 1) * GOLDEN``. A stream key is derived from
``(seed, stream, index)``, so sample ``i`` of a Monte Carlo run owns its own
substream and can be regenerated on any worker in any order.

Uniforms are ``((bits >> 11) + 0.5) * 2**-53`` and lie strictly inside (0, 1).
"""

from __future__ import annotations

import numba as nb
import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD1B54A32D192ED03
_MASK = (1 << 64) - 1
INV_2_53 = 2.0**-53


def _mix_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int = 0, index: int = 0) -> int:
    """64-bit key of substream ``index`` within ``stream`` of ``seed``."""
    base = _mix_int((seed & _MASK) ^ _mix_int((stream * _STREAM_SALT) & _MASK))
    return _mix_int(base + (index & _MASK) * GOLDEN)


def uniforms(key: int, start: int, n: int) -> np.ndarray:
    """Draws ``start .. start+n-1`` of the stream with the given key."""
    with np.errstate(over="ignore"):
        z = np.uint64(key) + (np.arange(start + 1, start + n + 1, dtype=np.uint64)
                              * np.uint64(GOLDEN))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * INV_2_53


@nb.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def uniform_at(key, j):
    z = mix64(key + np.uint64(j + 1) * np.uint64(GOLDEN))
    return (np.float64(z >> np.uint64(11)) + 0.5) * INV_2_53


@nb.njit(nogil=True, cache=True)
def sample_keys(base, start, n):
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = mix64(np.uint64(base) + np.uint64(start + i) * np.uint64(GOLDEN))
    return out


def stream_base(seed: int, stream: int = 0) -> int:
    return _mix_int((seed & _MASK) ^ _mix_int((stream * _STREAM_SALT) & _MASK))


class RngStream:
    """Sequential view over one counter-based substream.

    ``position`` advances as draws are consumed; two streams built from the
    same ``(seed, stream, index)`` produce identical draws.
    """

    def __init__(self, seed: int, stream: int = 0, index: int = 0):
        self.seed = seed
        self.stream = stream
        self.index = index
        self.key = stream_key(seed, stream, index)
        self.position = 0

    def take(self, n: int) -> np.ndarray:
        u = uniforms(self.key, self.position, n)
        self.position += n
        return u

    def __repr__(self) -> str:
        return (f"RngStream(seed={self.seed}, stream={self.stream}, "
                f"index={self.index}, position={self.position})")
