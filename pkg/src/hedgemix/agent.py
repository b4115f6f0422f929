"""The mixture agent: weighted planning, reward-loss weighting, model lifecycle.

Per step: pick the action maximising the weight-averaged per-model value
estimates (or explore), observe, have every active model predict a reward
distribution conditioned on its own (state, action, next state), incur
log losses into the aggregator, then train every model on the realized
transition.  New models can be injected at any step boundary; when the
pool is full the lowest-weight model retires first.

The ``adaptive`` flag selects the admission rule for an injected model
that replaces another: adaptive admission prices the newcomer at the
learner's own cumulative loss (the late-arrival rule), the non-adaptive
ablation hands it the replaced model's outgoing weight instead.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import History
from .hedge import HedgeState, LossRecord
from .phibctw import Specialist, pack_bits
from .planner import PlannerConfig, q_estimate
from .predicates.base import PredicateSpec, Registry

__all__ = ["AgentConfig", "StepRecord", "MixtureAgent"]

DOMAIN_DEFAULTS = {
    # horizon, simulations, epsilon0, epsilon_decay
    "rps": (4, 40, 0.999, 0.9999),
    "taxi": (14, 50, 0.999, 0.9999),
    "epidemic": (10, 20, 0.9999, 0.999999),
}


@dataclass(frozen=True)
class AgentConfig:
    horizon: int
    simulations: int          # per-step search budget, divided across models
    epsilon0: float
    epsilon_decay: float
    eta: float = 1.0
    epsilon_floor: float = 0.01
    max_specialists: int = 10
    adaptive: bool = True            # False = weight-inheriting ablation
    ucb_c: float | None = None
    q_weight_floor: float = 0.01     # models below this weight skip planning
    pretrain_window: int = 4000

    @classmethod
    def for_domain(cls, domain: str, **overrides) -> "AgentConfig":
        h, sims, e0, dec = DOMAIN_DEFAULTS[domain]
        cfg = cls(horizon=h, simulations=sims, epsilon0=e0, epsilon_decay=dec)
        return replace(cfg, **overrides) if overrides else cfg

    def epsilon_at(self, t: int) -> float:
        return max(self.epsilon0 * (self.epsilon_decay ** t), self.epsilon_floor)


@dataclass
class StepRecord:
    t: int
    action: int
    obs: object
    reward: float
    epsilon: float
    learner_loss: float
    per_losses: dict[str, float]
    weights: dict[str, float]
    states: dict[str, int]
    explored: bool


def _salt(name: str) -> int:
    return int(hashlib.sha1(name.encode()).hexdigest()[:12], 16)


class MixtureAgent:
    def __init__(self, config: AgentConfig, action_space, obs_space, reward_codec,
                 registry: Registry, agent_seed: int = 0, predicate_seed: int = 0):
        self.config = config
        self.registry = registry
        self.action_space = action_space
        self.reward_codec = reward_codec
        self.history = History(action_space, obs_space, reward_codec)
        self.hedge = HedgeState(eta=config.eta)
        self.pool: dict[str, Specialist] = {}
        self.s_prev: dict[str, np.ndarray] = {}
        self.t = 0
        self.agent_seed = agent_seed
        self.predicate_seed = predicate_seed
        self._rng = np.random.default_rng(np.random.SeedSequence((agent_seed, 0xA6E)))
        self._next_model_index = 0

    # -- model lifecycle ----------------------------------------------------
    def _build_specialist(self, spec_id: str, predicate_specs) -> Specialist:
        preds = [self.registry.build(s) for s in predicate_specs]
        return Specialist(spec_id, preds,
                          action_width=self.action_space.bit_width,
                          reward_width=self.reward_codec.bit_width,
                          arrival=self.t)

    def fresh_model_id(self, predicate_specs) -> str:
        """Stable, unique id: running index + digest of the spec list."""
        blob = "|".join(s.id for s in predicate_specs)
        digest = hashlib.sha1(blob.encode()).hexdigest()[:6]
        mid = f"m{self._next_model_index:03d}-{digest}"
        self._next_model_index += 1
        return mid

    def inject_model(self, predicate_specs, pretrain_steps=None,
                     spec_id: str | None = None, replaced_log_weight: float | None = None) -> str:
        """Build, optionally pre-train, and admit a new model.

        ``pretrain_steps`` is the recent (action, obs, reward symbol)
        window; the model replays it through its own state abstraction
        before entering the mixture.  ``replaced_log_weight`` must be the
        retired model's outgoing weight when running the non-adaptive
        ablation and a replacement happened this step.
        """
        if len(self.pool) >= self.config.max_specialists:
            raise ValueError("pool full: retire a model before injecting")
        spec_id = spec_id or self.fresh_model_id(predicate_specs)
        if spec_id in self.pool:
            raise ValueError(f"duplicate model id {spec_id!r}")
        sp = self._build_specialist(spec_id, predicate_specs)
        sp.set_recording(False)
        if pretrain_steps:
            self._pretrain(sp, pretrain_steps[-self.config.pretrain_window:])
        if not self.config.adaptive and replaced_log_weight is not None:
            self.hedge.admit_with_log_weight(spec_id, self.t, replaced_log_weight)
        else:
            self.hedge.admit(spec_id, self.t)
        self.pool[spec_id] = sp
        self.s_prev[spec_id] = sp.phi(self.history, self.predicate_seed)
        return spec_id

    def _pretrain(self, sp: Specialist, window) -> None:
        """Replay the buffered window through the model's own abstraction.

        The replay history starts empty, so lookback predicates treat
        anything before the window as missing (their default-0 case).
        """
        h = History(self.history.action_space, self.history.obs_space,
                    self.reward_codec)
        s_prev = sp.phi(h, self.predicate_seed)
        for a, o, r_sym in window:
            h.append(a, o, r_sym)
            s_next = sp.phi(h, self.predicate_seed)
            sp.observe(s_prev, a, s_next, r_sym)
            s_prev = s_next

    def drop_lowest(self) -> tuple[str, float]:
        """Retire the lowest-weight model; returns (id, its log weight)."""
        if not self.pool:
            raise ValueError("pool is empty")
        weights = self.hedge.normalized_weights()
        victim = min(self.pool,
                     key=lambda i: (weights[i], self.pool[i].arrival, i))
        log_w = self.hedge.log_weight(victim)
        self.hedge.retire(victim, at_time=self.t)
        self.pool[victim].death = self.t
        del self.pool[victim]
        del self.s_prev[victim]
        return victim, log_w

    def retire_model(self, spec_id: str) -> None:
        if spec_id not in self.pool:
            raise KeyError(f"unknown model id {spec_id!r}")
        self.hedge.retire(spec_id, at_time=self.t)
        self.pool[spec_id].death = self.t
        del self.pool[spec_id]
        del self.s_prev[spec_id]

    # -- acting ------------------------------------------------------------
    def _search_seed(self, spec_id: str) -> int:
        ss = np.random.SeedSequence((self.agent_seed, self.t, _salt(spec_id)))
        return int(ss.generate_state(1)[0])

    def _allocate_sims(self, planned: dict[str, float]) -> dict[str, int]:
        """Split the per-step simulation budget across planned models.

        Weight-proportional with largest-remainder rounding; every planned
        model keeps at least one simulation while budget lasts.
        """
        budget = self.config.simulations
        order = sorted(planned, key=lambda i: (-planned[i], i))
        if budget <= len(order):
            return {i: 1 for i in order[:budget]}
        total_w = sum(planned.values())
        shares = {i: max(1, int(budget * planned[i] / total_w)) for i in order}
        spare = budget - sum(shares.values())
        k = 0
        while spare > 0:
            shares[order[k % len(order)]] += 1
            spare -= 1
            k += 1
        while spare < 0:  # over-allocated by the per-model minimum of 1
            victim = order[-1 - (k % len(order))]
            if shares[victim] > 1:
                shares[victim] -= 1
                spare += 1
            k += 1
        return shares

    def select_action(self, epsilon: float | None = None) -> tuple[int, bool]:
        """(action, explored).  Exploration draws precede any planning."""
        if not self.pool:
            raise ValueError("no active models")
        eps = self.config.epsilon_at(self.t) if epsilon is None else epsilon
        n_actions = self.action_space.cardinality
        if self._rng.random() < eps:
            return int(self._rng.integers(0, n_actions)), True
        weights = self.hedge.normalized_weights()
        planned = {i: w for i, w in weights.items()
                   if w >= self.config.q_weight_floor}
        if not planned:
            top = max(weights, key=lambda i: (weights[i], i))
            planned = {top: weights[top]}
        sims = self._allocate_sims(planned)
        total = sum(planned[i] for i in sims)
        q_mix = np.zeros(n_actions)
        for spec_id in sorted(sims):
            sp = self.pool[spec_id]
            sp.set_recording(True)
            cfg = PlannerConfig(horizon=self.config.horizon,
                                simulations=sims[spec_id],
                                ucb_c=self.config.ucb_c,
                                seed=self._search_seed(spec_id))
            q = q_estimate(sp, self.s_prev[spec_id], n_actions, cfg,
                           self.reward_codec)
            sp.set_recording(False)
            q_mix += (planned[spec_id] / total) * q
        return int(np.argmax(q_mix)), False

    # -- learning -------------------------------------------------------------
    def update(self, action: int, obs, reward: float, epsilon: float = 0.0,
               explored: bool = False) -> StepRecord:
        r_sym = self.reward_codec.encode(reward)
        self.history.append(action, obs, r_sym)
        self.t += 1
        states: dict[str, np.ndarray] = {}
        dists: dict[str, np.ndarray] = {}
        for spec_id in sorted(self.pool):
            sp = self.pool[spec_id]
            s_next = sp.phi(self.history, self.predicate_seed)
            states[spec_id] = s_next
            dists[spec_id] = sp.predict_reward(self.s_prev[spec_id], action, s_next)
        mixture = self.hedge.mix(dists)
        learner_loss = -math.log(mixture[r_sym])
        per = {i: -math.log(d[r_sym]) for i, d in dists.items()}
        self.hedge.incur(LossRecord(t=self.t, learner=learner_loss, per_expert=per))
        for spec_id in sorted(self.pool):
            sp = self.pool[spec_id]
            sp.observe(self.s_prev[spec_id], action, states[spec_id], r_sym)
            self.s_prev[spec_id] = states[spec_id]
        return StepRecord(
            t=self.t, action=action, obs=obs, reward=reward, epsilon=epsilon,
            learner_loss=learner_loss, per_losses=per,
            weights=self.hedge.normalized_weights(),
            states={i: pack_bits(b) for i, b in states.items()},
            explored=explored)
