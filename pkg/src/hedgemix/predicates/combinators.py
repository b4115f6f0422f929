"""Small function combinators the predicate libraries are assembled from."""

from __future__ import annotations

import math

__all__ = [
    "compose",
    "encode_bucket",
    "bit_of",
    "eq_one",
    "geq",
    "ma_reward",
    "percent_action",
    "rate_of_change",
]


def compose(*fns):
    """Reverse composition: ``compose(f, g)(x) == g(f(x))``."""
    def composed(x):
        for f in fns:
            x = f(x)
        return x
    return composed


def encode_bucket(value: float, lo: float, hi: float, n_bits: int) -> int:
    """Clamp ``value`` into [lo, hi] and index its bucket among 2**n_bits."""
    if not lo < hi:
        raise ValueError("require lo < hi")
    buckets = 1 << n_bits
    z = (min(max(value, lo), hi) - lo) / (hi - lo)
    return min(int(math.floor(z * buckets)), buckets - 1)


def bit_of(value: int, i: int, n_bits: int) -> int:
    """The i-th bit (1-indexed, most significant first) of an n-bit value."""
    if not 1 <= i <= n_bits:
        raise ValueError(f"bit index {i} outside 1..{n_bits}")
    return (value >> (n_bits - i)) & 1


def eq_one(x) -> bool:
    return x == 1


def geq(p: float):
    return lambda x: x >= p


def ma_reward(h, w: int) -> float:
    """Mean of the last min(w, length) decoded rewards; 0 on empty history."""
    vals = h.recent_reward_values(min(w, len(h)))
    return sum(vals) / len(vals) if vals else 0.0


def percent_action(h, action: int, n: int) -> float:
    """Fraction of the last min(n, length) actions equal to ``action``."""
    recent = h.recent_actions(min(n, len(h)))
    return sum(1 for a in recent if a == action) / len(recent) if recent else 0.0


def rate_of_change(x: float, y: float):
    """x / y, with a zero denominator signalling 'no ratio' (None)."""
    return None if y == 0 else x / y
