"""Simulated knowledge arrival: pools, proportion schedule, replacement.

Every ``period`` steps a new model spec is drawn with floor(p*d)
predicates from the informative pool and the rest from the uninformative
pool, where p starts at ``p0`` and climbs by ``dp`` per period.  The
emitted command is the same structure the live injection endpoint
accepts, so scheduled and human injections share one code path.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .predicates.base import PredicateSpec
from .predicates.pools import PredicatePools

__all__ = ["InjectionSchedule", "InjectionCommand", "RetireCommand",
           "HistoryBuffer", "sample_model_spec", "Injector"]


@dataclass(frozen=True)
class InjectionSchedule:
    depth: int
    period: int = 4000
    p0: float = 0.05
    dp: float = 0.05
    p_max: float = 1.0

    def proportion_at(self, t: int) -> float:
        return min(self.p0 + self.dp * (t // self.period), self.p_max)


@dataclass
class InjectionCommand:
    """What an injection source asks the agent to do at a step boundary."""

    predicates: list
    pretrain: bool = True
    drop: str | None = None  # None, "lowest", or an explicit model id
    source: str = "schedule"
    spec_id: str | None = None  # pre-reserved model id (live/replay commands)


@dataclass
class RetireCommand:
    spec_id: str
    source: str = "live"


class HistoryBuffer:
    """Ring of the most recent (action, obs, reward symbol) triples."""

    def __init__(self, capacity: int):
        self._buf = deque(maxlen=capacity)

    def push(self, action: int, obs, r_sym: int) -> None:
        self._buf.append((action, obs, r_sym))

    def snapshot(self) -> list:
        return list(self._buf)

    def __len__(self):
        return len(self._buf)


def sample_model_spec(pools: PredicatePools, p: float, d: int, rng) -> list[PredicateSpec]:
    """Draw d specs, floor(p*d) informative, order shuffled.

    Draws without replacement whenever a pool is large enough, with
    replacement otherwise (tiny pools).
    """
    if not pools.informative or d < 1:
        raise ValueError("need a non-empty informative pool and d >= 1")
    k = min(int(math.floor(p * d)), d)

    def draw(pool, count):
        pool = list(pool)
        if count == 0:
            return []
        if len(pool) >= count:
            idx = rng.choice(len(pool), size=count, replace=False)
        else:
            idx = rng.integers(0, len(pool), size=count)
        return [pool[i] for i in idx]

    specs = draw(pools.informative, k) + draw(pools.uninformative, d - k)
    order = rng.permutation(len(specs))
    return [specs[i] for i in order]


class Injector:
    """Drives scheduled injections against a running agent."""

    def __init__(self, schedule: InjectionSchedule, pools: PredicatePools, rng):
        self.schedule = schedule
        self.pools = pools
        self.rng = rng
        self.buffer = HistoryBuffer(schedule.period)

    def observe_step(self, action: int, obs, r_sym: int) -> None:
        self.buffer.push(action, obs, r_sym)

    def tick(self, t: int, pool_size: int, max_specialists: int) -> InjectionCommand | None:
        """An injection command at period boundaries, else None."""
        if t <= 0 or t % self.schedule.period != 0:
            return None
        p = self.schedule.proportion_at(t)
        specs = sample_model_spec(self.pools, p, self.schedule.depth, self.rng)
        return InjectionCommand(predicates=specs, pretrain=True,
                                drop="lowest" if pool_size >= max_specialists else None)
