"""Pick-up/drop-off grid task on a 2x5 board with no interior walls.

The passenger and destination spawn at the four corners; driving into a
wall costs -1, a successful drop-off pays +100 and immediately respawns a
new task (the stream is continuing, episodes are embedded).  Wrong-place
pickup and dropoff are no-ops with reward 0.

Observation ``(x, y, p, d, in_taxi)`` is packed field-aligned into one
10-bit symbol: x (1 bit), y (3 bits), p = passenger corner 0-3 or 4 when
aboard (3 bits), d = destination corner (2 bits), in_taxi flag (1 bit).
Field alignment keeps each observation component on its own bit span, so
history-suffix bit predicates line up with observation fields.  Patterns
with y > 4 or p > 4 are never emitted.
"""

from __future__ import annotations

from ..core import DiscreteRewardCodec, SymbolSpace

ROWS, COLS = 2, 5
CORNERS = ((0, 0), (1, 0), (0, 4), (1, 4))
N, S, E, W, PICKUP, DROPOFF = range(6)

OBS_CARDINALITY = 1 << 10


def pack_obs(x: int, y: int, p: int, d: int, in_taxi: int) -> int:
    return (((((x << 3) | y) << 3) | p) << 3) | (d << 1) | in_taxi


def unpack_obs(idx: int) -> tuple[int, int, int, int, int]:
    in_taxi = idx & 1
    d = (idx >> 1) & 0b11
    p = (idx >> 3) & 0b111
    y = (idx >> 6) & 0b111
    x = (idx >> 9) & 1
    return x, y, p, d, in_taxi


class TaxiEnv:
    action_space = SymbolSpace("taxi_action", 6)
    obs_space = SymbolSpace("taxi_obs", OBS_CARDINALITY)
    reward_codec = DiscreteRewardCodec((-1.0, 0.0, 100.0))

    def __init__(self, rng):
        self.x = int(rng.integers(0, ROWS))
        self.y = int(rng.integers(0, COLS))
        self._spawn_task(rng)

    def _spawn_task(self, rng) -> None:
        self.passenger = int(rng.integers(0, 4))
        others = [c for c in range(4) if c != self.passenger]
        self.dest = others[int(rng.integers(0, 3))]
        self.in_taxi = 0

    def _obs(self) -> int:
        p = 4 if self.in_taxi else self.passenger
        return pack_obs(self.x, self.y, p, self.dest, self.in_taxi)

    def step(self, action: int, rng) -> tuple[int, float]:
        reward = 0.0
        if action == N:
            if self.x == 0:
                reward = -1.0
            else:
                self.x -= 1
        elif action == S:
            if self.x == ROWS - 1:
                reward = -1.0
            else:
                self.x += 1
        elif action == E:
            if self.y == COLS - 1:
                reward = -1.0
            else:
                self.y += 1
        elif action == W:
            if self.y == 0:
                reward = -1.0
            else:
                self.y -= 1
        elif action == PICKUP:
            if not self.in_taxi and (self.x, self.y) == CORNERS[self.passenger]:
                self.in_taxi = 1
        elif action == DROPOFF:
            if self.in_taxi and (self.x, self.y) == CORNERS[self.dest]:
                reward = 100.0
                self._spawn_task(rng)
        else:
            raise ValueError(f"unknown taxi action {action}")
        return self._obs(), reward
