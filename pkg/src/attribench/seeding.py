"""Order-independent seed derivation."""
from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, key: str) -> int:
    """64-bit seed from a master seed and a canonical key string."""
    h = splitmix64(int(master_seed) & MASK64)
    for byte in key.encode("utf-8"):
        h = splitmix64(h ^ byte)
    return h
