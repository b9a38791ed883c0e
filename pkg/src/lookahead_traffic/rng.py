"""Deterministic, platform-independent random streams.

Every stochastic object in this package draws from :class:`RngStream`, a
counter-based generator: draw ``i`` of a stream with seed ``s`` is obtained by
hashing ``s + (i + 1) * GAMMA`` (mod 2**64) with the splitmix64 finalizer.
Because the state is just (seed, counter) and the arithmetic is exact integer
arithmetic, the compiled and pure-Python kernels produce bit-identical draw
sequences, and batches are equal to the concatenation of single draws.
"""
from __future__ import annotations

import numpy as np

from .kernels import uniforms

_MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(value: int) -> int:
    """splitmix64 finalizer: a bijective hash on 64-bit integers."""
    z = value & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def derive_seed(master_seed: int, index: int) -> int:
    """Seed for the ``index``-th substream of ``master_seed``.

    Used to give each ensemble realization its own independent stream; the
    mapping is fixed so a realization's trajectory depends only on
    (master_seed, index), never on scheduling order or worker count.
    """
    if index < 0:
        raise ValueError("substream index must be >= 0")
    return mix64((master_seed + mix64(index + 1)) & _MASK64)


class RngStream:
    """Uniform [0, 1) stream with 64-bit seed and explicit counter state."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = np.array([seed & _MASK64, 0], dtype=np.uint64)

    @property
    def seed(self) -> int:
        return int(self._state[0])

    @property
    def counter(self) -> int:
        """Number of draws consumed so far."""
        return int(self._state[1])

    @property
    def state(self) -> np.ndarray:
        """The raw (seed, counter) array shared with the stepping kernels."""
        return self._state

    def uniform(self, size: int | None = None):
        """Next uniform draw (scalar) or the next ``size`` draws (array)."""
        if size is None:
            return float(uniforms(self._state, 1)[0])
        if size < 0:
            raise ValueError("size must be >= 0")
        return uniforms(self._state, size)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"RngStream(seed={self.seed:#018x}, counter={self.counter})"
