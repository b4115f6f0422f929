"""Bootstrap particle filter over hidden SEIRS node labels.

Runs the same transition and observation models as the environment (with
the parameters the predicate was given, which need not be the true ones)
and exposes the expected fraction of infectious nodes under the current
belief.  Belief state is cached per history object and advanced
incrementally; per-step randomness is keyed by (run seed, filter salt,
step index) so any evaluation order reproduces the same filter path.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from ..envs.epidemic import (
    E,
    I,
    S,
    EpidemicParams,
    apply_action_effects,
    observation_log_likelihood,
    transition_labels,
)
from ..envs.graphs import ContactGraph

__all__ = ["SeirsBeliefFilter"]


@dataclass
class _BeliefState:
    processed: int
    labels: np.ndarray          # (m_particles, n_nodes)
    immunity_level: np.ndarray  # (n_nodes,) deterministic replay of actions
    quarantined: np.ndarray     # (n_nodes,)


class SeirsBeliefFilter:
    def __init__(self, graph: ContactGraph, params: EpidemicParams, m_particles: int,
                 initial_exposed: float = 0.05, initial_infectious: float = 0.0):
        if m_particles < 1:
            raise ValueError("need at least one particle")
        self.graph = graph
        self.params = params
        self.m = m_particles
        self.initial_exposed = initial_exposed
        self.initial_infectious = initial_infectious
        self.adjacency = graph.adjacency().astype(np.float64)
        self._cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()

    # -- deterministic per-step randomness ---------------------------------
    def _rng(self, seed: int, salt: int, step: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((seed & (1 << 63) - 1,
                                                             salt & (1 << 63) - 1,
                                                             step + 1)))

    def _fresh(self, seed: int, salt: int) -> _BeliefState:
        n = self.graph.n
        rng = self._rng(seed, salt, -1)
        u = rng.random((self.m, n))
        labels = np.full((self.m, n), S, dtype=np.int8)
        labels[u < self.initial_exposed + self.initial_infectious] = E
        labels[u < self.initial_infectious] = I
        return _BeliefState(processed=0, labels=labels,
                            immunity_level=np.zeros(n, dtype=np.int8),
                            quarantined=np.zeros(n, dtype=bool))

    def _advance(self, st: _BeliefState, action: int, obs, seed: int, salt: int) -> None:
        rng = self._rng(seed, salt, st.processed)
        apply_action_effects(self.graph, action, st.quarantined, st.immunity_level)
        active = (st.labels == I) & ~st.quarantined[None, :]
        k = active.astype(np.float64) @ self.adjacency
        k[:, st.quarantined] = 0.0
        omega = self.params.immunity_multipliers[st.immunity_level][None, :]
        st.labels = transition_labels(st.labels, omega, k, self.params,
                                      rng.random(st.labels.shape))
        obs_arr = np.asarray(obs, dtype=np.int8)
        logw = observation_log_likelihood(st.labels, obs_arr[None, :], self.params)
        logw -= logw.max()
        w = np.exp(logw)
        total = w.sum()
        if not np.isfinite(total) or total <= 0.0:
            # impossible observation under these parameters: documented
            # degeneracy policy is a uniform particle reset
            st.labels = rng.integers(0, 4, size=st.labels.shape).astype(np.int8)
        else:
            idx = rng.choice(self.m, size=self.m, p=w / total)
            st.labels = st.labels[idx]
        st.processed += 1

    def infection_rate(self, h, seed: int, salt: int) -> float:
        """Expected fraction of infectious nodes given the history so far."""
        st = self._cache.get(h)
        if st is None or st.processed > len(h):
            st = self._fresh(seed, salt)
            self._cache[h] = st
        while st.processed < len(h):
            i = st.processed
            self._advance(st, h.action(i), h.obs(i), seed, salt)
        return float((st.labels == I).mean())
