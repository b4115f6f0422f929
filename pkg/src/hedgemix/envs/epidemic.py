"""Stochastic SEIRS process on a contact network with testing observations.

Node labels move S -> E -> I -> R -> S.  A susceptible node with k
infectious, non-quarantined neighbours and immunity multiplier w becomes
exposed with probability (1 - (1-beta)^k) / w; E -> I at rate sigma,
I -> R at gamma, R -> S at rho.  Each step every node emits one of
{positive, negative, untested}: a node in compartment X is tested with
probability alpha_X and a tested node reads positive with probability
mu_X.

Actions: index 0 does nothing; 1-5 quarantine the top {0.2,...,1.0}
fraction of nodes by betweenness (their edges vanish for that one step);
6-10 raise immunity one level for the next 20-percentile band of the
ranking.  Reward is -(positive tests) - action cost, plus 2 per node on
any step that ends with no exposed or infectious nodes left.

The transition and observation helpers are shared with the belief-state
predicates, which must filter under exactly these dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import LinearRewardCodec, SymbolSpace, VectorSpace
from .graphs import ContactGraph

S, E, I, R = 0, 1, 2, 3
OBS_POS, OBS_NEG, OBS_UNK = 0, 1, 2

__all__ = [
    "EpidemicParams",
    "EpidemicState",
    "EpidemicEnv",
    "epidemic_action_table",
    "apply_action_effects",
    "transition_row",
    "transition_labels",
    "sample_observations",
    "observation_log_likelihood",
]


@dataclass(frozen=True)
class EpidemicParams:
    beta: float = 0.2
    sigma: float = 0.3
    gamma: float = 0.08
    rho: float = 0.1
    alpha_s: float = 0.1
    alpha_e: float = 0.1
    alpha_i: float = 0.8
    alpha_r: float = 0.05
    mu_s: float = 0.1
    mu_e: float = 0.9
    mu_i: float = 0.9
    mu_r: float = 0.1
    eta1: float = 2.0
    eta2: float = 4.0

    def __post_init__(self):
        for name in ("beta", "sigma", "gamma", "rho",
                     "alpha_s", "alpha_e", "alpha_i", "alpha_r",
                     "mu_s", "mu_e", "mu_i", "mu_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha_s, self.alpha_e, self.alpha_i, self.alpha_r])

    @property
    def mus(self) -> np.ndarray:
        return np.array([self.mu_s, self.mu_e, self.mu_i, self.mu_r])

    @property
    def immunity_multipliers(self) -> np.ndarray:
        return np.array([1.0, self.eta1, self.eta2])


def transition_row(label: int, k: int, omega: float, params: EpidemicParams) -> np.ndarray:
    """Next-label distribution for one node; rows sum to 1 for all inputs."""
    row = np.zeros(4)
    if label == S:
        p = (1.0 - (1.0 - params.beta) ** k) / omega
        row[E] = p
        row[S] = 1.0 - p
    elif label == E:
        row[I] = params.sigma
        row[E] = 1.0 - params.sigma
    elif label == I:
        row[R] = params.gamma
        row[I] = 1.0 - params.gamma
    elif label == R:
        row[S] = params.rho
        row[R] = 1.0 - params.rho
    else:
        raise ValueError(f"unknown label {label}")
    return row


def transition_labels(labels: np.ndarray, omega: np.ndarray, k: np.ndarray,
                      params: EpidemicParams, uniforms: np.ndarray) -> np.ndarray:
    """Vectorized one-step label evolution (works on any leading shape)."""
    p_se = (1.0 - (1.0 - params.beta) ** k) / omega
    out = labels.copy()
    is_s = labels == S
    is_e = labels == E
    is_i = labels == I
    is_r = labels == R
    out[is_s & (uniforms < p_se)] = E
    out[is_e & (uniforms < params.sigma)] = I
    out[is_i & (uniforms < params.gamma)] = R
    out[is_r & (uniforms < params.rho)] = S
    return out


def sample_observations(labels: np.ndarray, params: EpidemicParams,
                        uniforms: np.ndarray) -> np.ndarray:
    """Per-node test outcome: cumulative thresholds alpha*mu, alpha, 1."""
    a = params.alphas[labels]
    m = params.mus[labels]
    out = np.full(labels.shape, OBS_UNK, dtype=np.int8)
    out[uniforms < a] = OBS_NEG
    out[uniforms < a * m] = OBS_POS
    return out


def observation_log_likelihood(labels: np.ndarray, obs: np.ndarray,
                               params: EpidemicParams) -> np.ndarray:
    """log P(obs | labels), summed over the trailing node axis."""
    a = params.alphas[labels]
    m = params.mus[labels]
    probs = np.where(obs == OBS_POS, a * m,
                     np.where(obs == OBS_NEG, a * (1.0 - m), 1.0 - a))
    return np.log(np.maximum(probs, 1e-300)).sum(axis=-1)


def epidemic_action_table() -> list[dict]:
    """The 11 interventions: nothing, 5 quarantines, 5 vaccination bands."""
    table = [{"kind": "nothing", "name": "DoNothing"}]
    for i in (0.2, 0.4, 0.6, 0.8, 1.0):
        table.append({"kind": "quarantine", "name": f"Quarantine({i:g})", "i": i})
    for i in (0.0, 0.2, 0.4, 0.6, 0.8):
        table.append({"kind": "vaccinate", "name": f"Vaccinate({i:g},{i + 0.2:g})",
                      "i": i, "j": round(i + 0.2, 10)})
    return table


def apply_action_effects(graph: ContactGraph, action: int,
                         quarantined: np.ndarray, immunity_level: np.ndarray) -> None:
    """Resolve one action index against state arrays, in place.

    Shared by the environment and the belief-state filter so both replay
    interventions identically: quarantine masks last one step, vaccination
    bumps the band's immunity one level (capped).
    """
    table = epidemic_action_table()
    quarantined[:] = False
    spec = table[action]
    if spec["kind"] == "quarantine":
        quarantined[graph.top_fraction(spec["i"])] = True
    elif spec["kind"] == "vaccinate":
        band = graph.rank_band(spec["i"], spec["j"])
        immunity_level[band] = np.minimum(immunity_level[band] + 1, 2)


@dataclass
class EpidemicState:
    labels: np.ndarray
    immunity_level: np.ndarray
    quarantined: np.ndarray

    def copy(self) -> "EpidemicState":
        return EpidemicState(self.labels.copy(), self.immunity_level.copy(),
                             self.quarantined.copy())


class EpidemicEnv:
    """SEIRS control environment over a fixed contact graph."""

    def __init__(self, graph: ContactGraph, params: EpidemicParams | None = None,
                 rng=None, quarantine_cost: float = 0.10, vaccinate_cost: float = 0.05,
                 initial_exposed_fraction: float = 0.05,
                 reward_levels: int = 64):
        self.graph = graph
        self.params = params or EpidemicParams()
        self.quarantine_cost = quarantine_cost
        self.vaccinate_cost = vaccinate_cost
        self.actions = epidemic_action_table()
        self.adjacency = graph.adjacency().astype(np.float64)
        n = graph.n
        self.action_space = SymbolSpace("epidemic_action", len(self.actions))
        self.obs_space = VectorSpace("epidemic_obs", 3, n)
        max_cost = max(self.action_cost(a) for a in range(len(self.actions)))
        self.reward_codec = LinearRewardCodec(-(n + max_cost), 2.0 * n, reward_levels)
        labels = np.zeros(n, dtype=np.int8)
        if rng is not None and initial_exposed_fraction > 0:
            n_exp = max(1, int(round(initial_exposed_fraction * n)))
            labels[rng.choice(n, size=n_exp, replace=False)] = E
        self.state = EpidemicState(labels=labels,
                                   immunity_level=np.zeros(n, dtype=np.int8),
                                   quarantined=np.zeros(n, dtype=bool))

    def action_cost(self, action: int) -> float:
        spec = self.actions[action]
        n = self.graph.n
        if spec["kind"] == "quarantine":
            return self.quarantine_cost * spec["i"] * n
        if spec["kind"] == "vaccinate":
            return self.vaccinate_cost * (spec["j"] - spec["i"]) * n
        return 0.0

    def apply_action(self, state: EpidemicState, action: int) -> None:
        """Set this step's quarantine mask / immunity bump on ``state``."""
        apply_action_effects(self.graph, action, state.quarantined, state.immunity_level)

    def infectious_neighbour_counts(self, state: EpidemicState) -> np.ndarray:
        active = (state.labels == I) & ~state.quarantined
        k = self.adjacency @ active.astype(np.float64)
        k[state.quarantined] = 0.0  # a quarantined node has no edges at all
        return k

    def step(self, action: int, rng) -> tuple[tuple, float]:
        st = self.state
        self.apply_action(st, action)
        k = self.infectious_neighbour_counts(st)
        omega = self.params.immunity_multipliers[st.immunity_level]
        st.labels = transition_labels(st.labels, omega, k, self.params,
                                      rng.random(self.graph.n))
        obs = sample_observations(st.labels, self.params, rng.random(self.graph.n))
        reward = -float((obs == OBS_POS).sum()) - self.action_cost(action)
        if not np.any((st.labels == E) | (st.labels == I)):
            reward += 2.0 * self.graph.n
        return tuple(int(o) for o in obs), reward
