"""Finite-horizon Monte-Carlo tree search over one abstract model.

Each search owns its model exclusively: every sampled transition updates
the model's chains (so within-rollout correlations are modelled) and each
simulation is reverted before the next begins, leaving the model
bit-identical after the search.  Action values estimate the expected sum
of the H+1 rewards collected from the root action onward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phibctw import pack_bits

__all__ = ["PlannerConfig", "DecisionNode", "ChanceNode", "uct_select", "rollout",
           "q_estimate"]


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int                 # H: plans over H+1 reward terms
    simulations: int
    ucb_c: float | None = None   # exploration constant in reward units;
                                 # None -> 0.5 * (H+1) * (r_max - r_min), which
                                 # measurably beats the full range on toy MDPs
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.simulations < 1:
            raise ValueError("need at least one simulation")


class DecisionNode:
    __slots__ = ("visits", "value_sum", "children")

    def __init__(self):
        self.visits = 0
        self.value_sum = 0.0
        self.children: dict[int, ChanceNode] = {}

    def chance(self, action: int) -> "ChanceNode":
        node = self.children.get(action)
        if node is None:
            node = ChanceNode()
            self.children[action] = node
        return node


class ChanceNode:
    __slots__ = ("visits", "value_sum", "children")

    def __init__(self):
        self.visits = 0
        self.value_sum = 0.0
        self.children: dict[tuple[int, int], DecisionNode] = {}

    def child(self, key: tuple[int, int]) -> DecisionNode:
        node = self.children.get(key)
        if node is None:
            node = DecisionNode()
            self.children[key] = node
        return node


def uct_select(node: DecisionNode, c: float, n_actions: int) -> int:
    """Upper-confidence action choice; unvisited actions first, ties by index."""
    for a in range(n_actions):
        ch = node.children.get(a)
        if ch is None or ch.visits == 0:
            return a
    log_n = math.log(node.visits)
    best_a, best_score = 0, -math.inf
    for a in range(n_actions):
        ch = node.children[a]
        score = ch.value_sum / ch.visits + c * math.sqrt(log_n / ch.visits)
        if score > best_score:
            best_a, best_score = a, score
    return best_a


def _decode_sampled(codec, r_sym: int) -> float:
    # chains sample raw bit patterns; patterns past the last level (possible
    # only while a context is undertrained) clamp to the top level
    return codec.decode(min(r_sym, codec.levels - 1))


def rollout(model, s_packed: int, depth_remaining: int, rng, codec, n_actions: int) -> float:
    """Uniform-random playout; model mutations stay on the trail."""
    total = 0.0
    s = s_packed
    for _ in range(depth_remaining):
        a = int(rng.integers(0, n_actions))
        s, r_sym = model.sample_packed(s, a, rng)
        total += _decode_sampled(codec, r_sym)
    return total


def _simulate(model, node: DecisionNode, s_packed: int, remaining: int, c: float,
              rng, codec, n_actions: int) -> float:
    if remaining == 0:
        return 0.0
    if node.visits == 0:
        value = rollout(model, s_packed, remaining, rng, codec, n_actions)
        node.visits = 1
        node.value_sum += value
        return value
    a = uct_select(node, c, n_actions)
    chance = node.chance(a)
    s2, r_sym = model.sample_packed(s_packed, a, rng)
    child = chance.child((s2, r_sym))
    value = _decode_sampled(codec, r_sym) + _simulate(model, child, s2, remaining - 1,
                                                      c, rng, codec, n_actions)
    chance.visits += 1
    chance.value_sum += value
    node.visits += 1
    node.value_sum += value
    return value


def q_estimate(model, s0_bits, n_actions: int, cfg: PlannerConfig, codec) -> np.ndarray:
    """Per-action value estimates at the root state; model left unchanged.

    Root simulations cycle round-robin over the actions so every entry of
    the Q map keeps converging (pure upper-confidence allocation starves
    losing arms); below the root the tree policy is upper-confidence
    selection.  Returns an array of length ``n_actions``; actions the
    search never reached (only possible when simulations < n_actions)
    report 0.
    """
    c = cfg.ucb_c if cfg.ucb_c is not None else (
        0.5 * (cfg.horizon + 1) * (codec.r_max - codec.r_min))
    rng = np.random.default_rng(cfg.seed)
    s0 = pack_bits(s0_bits)
    root = DecisionNode()
    root.visits = 1  # the root is always expanded, never rolled out blindly
    base = model.mark()
    for i in range(cfg.simulations):
        m = model.mark()
        a = i % n_actions
        chance = root.chance(a)
        s2, r_sym = model.sample_packed(s0, a, rng)
        child = chance.child((s2, r_sym))
        value = _decode_sampled(codec, r_sym) + _simulate(
            model, child, s2, cfg.horizon, c, rng, codec, n_actions)
        chance.visits += 1
        chance.value_sum += value
        root.visits += 1
        root.value_sum += value
        model.revert_to(m)
    model.revert_to(base)
    q = np.zeros(n_actions)
    for a, chance in root.children.items():
        if chance.visits > 0:
            q[a] = chance.value_sum / chance.visits
    return q
