"""Deterministic random stream shared by every stochastic component.

The generator is splitmix64.  It is tiny, has a single 64-bit word of state,
and is implemented identically here and in the compiled fuzzing kernel, so a
trial's Python-side decisions (seed selection, energy) and kernel-side
decisions (sequences, mutations) draw from one replayable stream.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / (1 << 53)


class FuzzRng:
    """splitmix64 stream.

    ``randbelow(n)`` maps the high 32 bits onto ``[0, n)`` with a multiply
    and shift (valid for ``n < 2**32``); ``random()`` returns a double in
    ``[0, 1)`` built from the top 53 bits.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next64(self) -> int:
        self.state = s = (self.state + GOLDEN) & MASK64
        z = ((s ^ (s >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        return ((self.next64() >> 32) * n) >> 32

    def random(self) -> float:
        return (self.next64() >> 11) * INV_2_53

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def fork(self) -> "FuzzRng":
        return FuzzRng(self.state)


def derive_seed(master: int, index: int) -> int:
    """Seed of trial ``index`` (1-based) within an experiment: ``master + index``."""
    return master + index
