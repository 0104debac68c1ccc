"""SplitMix64 pseudo-random streams.

The generator is fixed bit-exactly so corpora and initial weights can be
reproduced from a seed by any implementation:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Uniforms take the top 53 bits: ``(z >> 11) * 2**-53``, in [0, 1).
Gaussians use the Box-Muller transform on consecutive uniform pairs
``(u1, u2)``: ``r = sqrt(-2 ln(1 - u1))`` yields ``r cos(2 pi u2)`` and then
``r sin(2 pi u2)``.
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    """SplitMix64 output function on a single 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-style SplitMix64 stream with vectorized block draws."""

    def __init__(self, seed: int):
        if seed < 0 or seed > MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.state = int(seed)

    def next_u64(self, n: int) -> np.ndarray:
        """Return the next ``n`` raw outputs as uint64."""
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + k * np.uint64(GOLDEN)
        self.state = (self.state + n * GOLDEN) & MASK64
        return _mix_array(states)

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


def derive_seed(master_seed: int, key: str) -> int:
    """Order-independent child seed for ``key`` (e.g. a relative file path)."""
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return mix64(master_seed ^ int.from_bytes(digest, "little"))
