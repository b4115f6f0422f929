"""Rock-paper-scissors against an exploitable opponent.

The opponent plays uniformly at random except after winning a round with
rock, in which case it plays rock again.  Payoffs for the agent:
win +1, draw 0, loss -1.
"""

from __future__ import annotations

from ..core import DiscreteRewardCodec, SymbolSpace

ROCK, PAPER, SCISSORS = 0, 1, 2

_BEATS = {ROCK: SCISSORS, PAPER: ROCK, SCISSORS: PAPER}  # key beats value


def _payoff(agent: int, env: int) -> float:
    if agent == env:
        return 0.0
    return 1.0 if _BEATS[agent] == env else -1.0


def rps_step(prev_round, agent_action: int, rng) -> tuple[int, float]:
    """One round; ``prev_round`` is (env_move, agent_reward) or None."""
    if prev_round is not None:
        prev_env, prev_reward = prev_round
        if prev_env == ROCK and prev_reward < 0:
            env_move = ROCK
        else:
            env_move = int(rng.integers(0, 3))
    else:
        env_move = int(rng.integers(0, 3))
    return env_move, _payoff(agent_action, env_move)


class BiasedRpsEnv:
    action_space = SymbolSpace("rps_action", 3)
    obs_space = SymbolSpace("rps_env_move", 3)
    reward_codec = DiscreteRewardCodec((-1.0, 0.0, 1.0))

    def __init__(self):
        self._prev = None

    def step(self, action: int, rng) -> tuple[int, float]:
        env_move, reward = rps_step(self._prev, action, rng)
        self._prev = (env_move, reward)
        return env_move, reward
