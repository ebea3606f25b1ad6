"""Deterministic random streams for battles and seed derivation.

Draws are produced in counter mode from SHA-256, so a stream's full state
is just (seed, position).  That makes streams trivially serializable,
replayable from any recorded position, and identical across platforms
and Python versions.
"""

from __future__ import annotations

import hashlib


def stable_hash64(*parts: object) -> int:
    """Stable 64-bit hash of a tuple of printable parts.

    Used wherever a derived seed must not change across runs or machines
    (per-match seeds, per-decision sub-seeds).  Python's builtin ``hash``
    is randomized per process and is never used for this.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class SeededStream:
    """Counter-mode RNG: the i-th draw depends only on (seed, i)."""

    def __init__(self, seed: int, position: int = 0) -> None:
        self.seed = seed
        self.position = position

    def _next_u64(self) -> int:
        digest = hashlib.sha256(f"{self.seed}:{self.position}".encode()).digest()
        self.position += 1
        return int.from_bytes(digest[:8], "big")

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high], inclusive."""
        if high < low:
            raise ValueError(f"empty range [{low}, {high}]")
        return low + self._next_u64() % (high - low + 1)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return self._next_u64() / 2**64

    def percent_roll(self, percent: int) -> bool:
        """True with probability percent/100, using one integer draw."""
        return self.randint(1, 100) <= percent

    def coin(self) -> int:
        """0 or 1."""
        return self.randint(0, 1)

    def choice_index(self, length: int) -> int:
        """Uniform index into a sequence of the given length."""
        if length <= 0:
            raise ValueError("cannot choose from an empty sequence")
        return self.randint(0, length - 1)

    def clone(self) -> "SeededStream":
        return SeededStream(self.seed, self.position)

    def __repr__(self) -> str:
        return f"SeededStream(seed={self.seed}, position={self.position})"
