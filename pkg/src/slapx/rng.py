"""Deterministic seeded randomness for reproducible runs.

SeededRng wraps the stdlib Mersenne Twister, whose output stream is
documented to be stable across Python versions for a fixed seed. It is
single-owner: never share one instance across threads.
"""
from __future__ import annotations

import os
import random


class SeededRng:
    def __init__(self, seed: int | None = None):
        if seed is None:
            seed = int.from_bytes(os.urandom(8), "big")
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._r = random.Random(self.seed)

    def bytes(self, n: int) -> bytes:
        return self._r.getrandbits(8 * n).to_bytes(n, "big") if n else b""

    def randint_bits(self, bits: int) -> int:
        """Uniform integer in [0, 2**bits)."""
        return self._r.getrandbits(bits)

    def randrange(self, upper: int) -> int:
        """Uniform integer in [0, upper)."""
        return self._r.randrange(upper)

    def random(self) -> float:
        return self._r.random()

    def expovariate(self, rate: float) -> float:
        return self._r.expovariate(rate)

    def uniform(self, a: float, b: float) -> float:
        return self._r.uniform(a, b)

    def gauss(self, mu: float, sigma: float) -> float:
        return self._r.gauss(mu, sigma)

    def shuffle(self, seq: list) -> None:
        self._r.shuffle(seq)

    def spawn(self, label: str) -> "SeededRng":
        """Derive an independent child stream; deterministic per (seed, label)."""
        h = 0xCBF29CE484222325
        for b in label.encode():
            h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
        return SeededRng(self.seed ^ h)
