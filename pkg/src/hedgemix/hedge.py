"""Exponential-weights aggregation over a changing set of models.

Weights live in log space: a model admitted at time t starts at
log(prior) - eta * L_t (the learner's own cumulative loss so far), active
models decay by eta times their per-step loss, and a retired model is gone
for good.  With log loss and eta = 1 the normalized weights coincide with
Bayesian posterior masses, and the late-arrival rule makes the effective
prior of a newcomer depend on how well the learner did before it arrived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["HedgeState", "LossRecord"]


@dataclass
class LossRecord:
    """Per-step losses: the learner's and each active model's."""

    t: int
    learner: float
    per_expert: dict[str, float] = field(default_factory=dict)


class HedgeError(ValueError):
    pass


class HedgeState:
    """Weight bookkeeping for contiguous specialists.

    Every expert is active over one contiguous interval; attempting to
    re-admit a retired id raises.  ``loss_history`` keeps full per-step
    records so the closed-form weight identities can be checked offline.
    """

    def __init__(self, eta: float = 1.0, keep_history: bool = True):
        if eta <= 0:
            raise HedgeError("eta must be positive")
        self.eta = eta
        self.log_w: dict[str, float] = {}
        self.prior: dict[str, float] = {}
        self.arrival: dict[str, int] = {}
        self.death: dict[str, int] = {}
        self.learner_cum_loss = 0.0
        self.keep_history = keep_history
        self.loss_history: list[LossRecord] = []
        self._retired: set[str] = set()

    # -- membership -------------------------------------------------------
    @property
    def active(self) -> set[str]:
        return set(self.log_w)

    def admit(self, expert_id: str, at_time: int = 0, prior_mass: float = 1.0) -> None:
        if expert_id in self.log_w:
            raise HedgeError(f"{expert_id!r} is already active")
        if expert_id in self._retired:
            raise HedgeError(
                f"{expert_id!r} was retired; contiguous specialists never return")
        if prior_mass <= 0:
            raise HedgeError("prior mass must be positive")
        self.prior[expert_id] = prior_mass
        self.arrival[expert_id] = at_time
        self.log_w[expert_id] = math.log(prior_mass) - self.eta * self.learner_cum_loss

    def admit_with_log_weight(self, expert_id: str, at_time: int, log_weight: float) -> None:
        """Admission at an explicit weight (the non-adaptive ablation rule)."""
        if expert_id in self.log_w:
            raise HedgeError(f"{expert_id!r} is already active")
        if expert_id in self._retired:
            raise HedgeError(
                f"{expert_id!r} was retired; contiguous specialists never return")
        self.prior[expert_id] = 1.0
        self.arrival[expert_id] = at_time
        self.log_w[expert_id] = log_weight

    def retire(self, expert_id: str, at_time: int = 0) -> None:
        if expert_id not in self.log_w:
            raise HedgeError(f"{expert_id!r} is not active")
        del self.log_w[expert_id]
        self.death[expert_id] = at_time
        self._retired.add(expert_id)

    # -- weights ------------------------------------------------------------
    def normalized_weights(self) -> dict[str, float]:
        if not self.log_w:
            return {}
        ids = sorted(self.log_w)
        logs = np.array([self.log_w[i] for i in ids])
        m = logs.max()
        w = np.exp(logs - m)
        w /= w.sum()
        return {i: float(x) for i, x in zip(ids, w)}

    def log_weight(self, expert_id: str) -> float:
        return self.log_w[expert_id]

    # -- core operations -----------------------------------------------------
    def mix(self, predictions: dict[str, np.ndarray]) -> np.ndarray:
        """Convex combination of active experts' distributions."""
        if set(predictions) != self.active:
            missing = self.active - set(predictions)
            extra = set(predictions) - self.active
            raise HedgeError(
                f"predictions must cover exactly the active set "
                f"(missing={sorted(missing)}, unexpected={sorted(extra)})")
        if not predictions:
            raise HedgeError("no active experts to mix")
        weights = self.normalized_weights()
        out = None
        for eid, dist in predictions.items():
            contrib = weights[eid] * np.asarray(dist, dtype=np.float64)
            out = contrib if out is None else out + contrib
        return out

    def incur(self, losses: LossRecord) -> None:
        """Apply one step of losses: decay survivors, accumulate L_t."""
        if not math.isfinite(losses.learner):
            raise HedgeError(f"non-finite learner loss at t={losses.t}")
        for eid, loss in losses.per_expert.items():
            if eid not in self.log_w:
                continue  # inactive experts are bookkept by admission, not here
            if not math.isfinite(loss):
                raise HedgeError(
                    f"non-finite loss for expert {eid!r} at t={losses.t} "
                    f"(a zero-probability prediction upstream)")
            self.log_w[eid] -= self.eta * loss
        self.learner_cum_loss += losses.learner
        if self.keep_history:
            self.loss_history.append(losses)
