"""Finite symbol spaces, reward codecs and the interaction history.

Everything downstream (context trees, the mixture, the planner) works on
small integer symbols and their fixed-width binary expansions, so the bit
conventions live here: most-significant bit first, widths fixed per space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SymbolSpace",
    "VectorSpace",
    "LinearRewardCodec",
    "DiscreteRewardCodec",
    "History",
    "binarize",
    "debinarize",
]


def binarize(symbol_index: int, width: int) -> np.ndarray:
    """Fixed-width base-2 expansion of ``symbol_index``, MSB first."""
    if width < 1:
        raise ValueError(f"width must be positive, got {width}")
    if not 0 <= symbol_index < (1 << width):
        raise ValueError(f"symbol index {symbol_index} out of range for width {width}")
    out = np.empty(width, dtype=np.int8)
    for i in range(width):
        out[i] = (symbol_index >> (width - 1 - i)) & 1
    return out


def debinarize(bits) -> int:
    """Inverse of :func:`binarize` for the same width."""
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ValueError("cannot decode an empty bit sequence")
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


@dataclass(frozen=True)
class SymbolSpace:
    """A finite symbol alphabet with a fixed binary width."""

    name: str
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError(f"{self.name}: cardinality must be >= 1")

    @property
    def bit_width(self) -> int:
        return max(1, math.ceil(math.log2(self.cardinality))) if self.cardinality > 1 else 1

    def encode(self, index: int) -> np.ndarray:
        if not 0 <= index < self.cardinality:
            raise ValueError(f"{self.name}: symbol {index} not in [0, {self.cardinality})")
        return binarize(index, self.bit_width)

    def decode(self, bits) -> int:
        return debinarize(bits)


@dataclass(frozen=True)
class VectorSpace:
    """A fixed-length vector of symbols from one per-element alphabet.

    Used for the per-node test outcomes of the epidemic environment; the
    bit view is the concatenation of the element expansions.
    """

    name: str
    element_cardinality: int
    length: int

    @property
    def element_width(self) -> int:
        return SymbolSpace(self.name, self.element_cardinality).bit_width

    @property
    def bit_width(self) -> int:
        return self.element_width * self.length

    def encode(self, values) -> np.ndarray:
        values = tuple(values)
        if len(values) != self.length:
            raise ValueError(f"{self.name}: expected {self.length} elements, got {len(values)}")
        w = self.element_width
        out = np.empty(self.bit_width, dtype=np.int8)
        for j, v in enumerate(values):
            if not 0 <= v < self.element_cardinality:
                raise ValueError(f"{self.name}: element {v} out of range")
            out[j * w:(j + 1) * w] = binarize(int(v), w)
        return out


@dataclass(frozen=True)
class LinearRewardCodec:
    """Uniform quantizer for real rewards over ``[r_min, r_max]``.

    Encoding clamps, then maps linearly onto ``levels`` buckets; decoding
    returns the bucket center, so one encode/decode round trip loses at
    most one bucket width.
    """

    r_min: float
    r_max: float
    levels: int

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ValueError("require r_min < r_max")
        if self.levels < 1:
            raise ValueError("require levels >= 1")

    @property
    def bit_width(self) -> int:
        return SymbolSpace("reward", self.levels).bit_width

    def encode(self, r: float) -> int:
        span = self.r_max - self.r_min
        z = (min(max(r, self.r_min), self.r_max) - self.r_min) / span
        return min(int(math.floor(z * self.levels)), self.levels - 1)

    def decode(self, index: int) -> float:
        if not 0 <= index < self.levels:
            raise ValueError(f"reward symbol {index} out of range")
        width = (self.r_max - self.r_min) / self.levels
        return self.r_min + (index + 0.5) * width


@dataclass(frozen=True)
class DiscreteRewardCodec:
    """Exact codec for environments whose reward set is a small fixed list."""

    values: tuple

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("need at least one reward value")
        if list(self.values) != sorted(self.values):
            raise ValueError("reward values must be sorted ascending")

    @property
    def levels(self) -> int:
        return len(self.values)

    @property
    def r_min(self) -> float:
        return float(self.values[0])

    @property
    def r_max(self) -> float:
        return float(self.values[-1])

    @property
    def bit_width(self) -> int:
        return SymbolSpace("reward", self.levels).bit_width

    def encode(self, r: float) -> int:
        # nearest listed value; exact matches are the normal case
        best, bestd = 0, abs(r - self.values[0])
        for i, v in enumerate(self.values):
            d = abs(r - v)
            if d < bestd:
                best, bestd = i, d
        return best

    def decode(self, index: int) -> float:
        return float(self.values[index])


class History:
    """Append-only action/observation/reward interaction sequence.

    Observations are either scalar symbol indices or tuples (one symbol
    per element) for vector observation spaces.  The canonical bit view
    concatenates each step's symbols in a-o-r order, each MSB first.
    Single writer; concurrent readers may hold it as a read-only snapshot.
    """

    def __init__(self, action_space: SymbolSpace, obs_space, reward_codec):
        self.action_space = action_space
        self.obs_space = obs_space
        self.reward_codec = reward_codec
        self._actions: list[int] = []
        self._obs: list = []
        self._rewards: list[int] = []

    def __len__(self) -> int:
        return len(self._actions)

    @property
    def length(self) -> int:
        return len(self._actions)

    def append(self, action: int, obs, reward_index: int) -> None:
        if not 0 <= action < self.action_space.cardinality:
            raise ValueError(f"action {action} out of range")
        if not 0 <= reward_index < self.reward_codec.levels:
            raise ValueError(f"reward symbol {reward_index} out of range")
        self._actions.append(int(action))
        self._obs.append(tuple(int(v) for v in obs) if isinstance(obs, (tuple, list, np.ndarray)) else int(obs))
        self._rewards.append(int(reward_index))

    def action(self, i: int) -> int:
        return self._actions[i]

    def obs(self, i: int):
        return self._obs[i]

    def reward_index(self, i: int) -> int:
        return self._rewards[i]

    def reward_value(self, i: int) -> float:
        return self.reward_codec.decode(self._rewards[i])

    def recent_actions(self, n: int) -> list[int]:
        return self._actions[-n:] if n > 0 else []

    def recent_reward_values(self, n: int) -> list[float]:
        return [self.reward_codec.decode(r) for r in (self._rewards[-n:] if n > 0 else [])]

    @property
    def bits_per_step(self) -> int:
        return (self.action_space.bit_width + self.obs_space.bit_width
                + SymbolSpace("r", self.reward_codec.levels).bit_width)

    def _step_bits(self, i: int) -> np.ndarray:
        a = binarize(self._actions[i], self.action_space.bit_width)
        o = self._obs[i]
        if isinstance(o, tuple):
            ob = self.obs_space.encode(o)
        else:
            ob = binarize(o, self.obs_space.bit_width)
        r = binarize(self._rewards[i], SymbolSpace("r", self.reward_codec.levels).bit_width)
        return np.concatenate([a, ob, r])

    def bit_view(self) -> np.ndarray:
        """Full bit expansion; intended for tests and small histories."""
        if not self._actions:
            return np.empty(0, dtype=np.int8)
        return np.concatenate([self._step_bits(i) for i in range(len(self._actions))])

    def suffix_bit(self, n: int) -> int:
        """The n-th bit counting back from the end of the bit view (n=1 is last).

        Returns 0 when the history is too short to contain that bit.
        """
        if n < 1:
            raise ValueError("suffix bit positions are 1-indexed")
        per = self.bits_per_step
        idx = n - 1
        step_back = idx // per
        i = len(self._actions) - 1 - step_back
        if i < 0:
            return 0
        bits = self._step_bits(i)
        return int(bits[per - 1 - (idx % per)])
