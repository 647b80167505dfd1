"""Deterministic, platform-independent randomness helpers.

Everything that shuffles, samples, or generates data in this package derives
its randomness from here, so a run is a pure function of its seeds. Python's
built-in ``hash()`` is randomized per process and numpy's bit generators are
not guaranteed stable across releases, so we build on ``hashlib.blake2b``,
which is specified byte-for-byte.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

_MASK63 = (1 << 63) - 1


def derive_seed(*parts: int | str) -> int:
    """Map a tuple of ints/strings to a stable 63-bit seed.

    Used to fan a base seed out to per-round, per-client, and per-epoch
    streams: ``derive_seed(base, round_idx, client_id)``.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, int):
            h.update(b"i" + part.to_bytes(16, "little", signed=True))
        else:
            encoded = part.encode("utf-8")
            h.update(b"s" + len(encoded).to_bytes(4, "little") + encoded)
    return int.from_bytes(h.digest(), "little") & _MASK63


class DetRng:
    """Counter-mode PRNG over blake2b: stable across platforms and runs.

    Not cryptographically meaningful in this use; the point is a documented,
    reproducible stream.
    """

    def __init__(self, seed: int):
        self._key = seed.to_bytes(16, "little", signed=True)
        self._counter = 0

    def next_u64(self) -> int:
        h = hashlib.blake2b(
            self._counter.to_bytes(8, "little"), digest_size=8, key=self._key
        )
        self._counter += 1
        return int.from_bytes(h.digest(), "little")

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), by rejection to avoid modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """K distinct indices from range(n) via partial Fisher-Yates."""
        if k > n:
            raise ValueError(f"cannot sample {k} from {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def choice(self, items: Sequence):
        return items[self.randbelow(len(items))]

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Normal draw via Box-Muller (one value per call, no caching)."""
        import math

        u1 = self.random()
        u2 = self.random()
        while u1 <= 0.0:
            u1 = self.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z


def shuffled_indices(n: int, seed: int) -> list[int]:
    """Deterministic permutation of range(n) for the given seed."""
    rng = DetRng(seed)
    indices = list(range(n))
    rng.shuffle(indices)
    return indices


def stable_hash64(data: bytes | str, *, seed: int = 0) -> int:
    """Seeded 64-bit hash of a token, stable across processes."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = hashlib.blake2b(data, digest_size=8, key=seed.to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")

