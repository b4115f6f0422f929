"""Experiment configuration: strict schema, file loading, seed fanout."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..agent import DOMAIN_DEFAULTS, AgentConfig

__all__ = ["ExperimentConfig", "load_config", "seed_streams", "DEFAULT_DEPTHS"]

DEFAULT_DEPTHS = {"rps": 2, "taxi": 17, "epidemic": 20}


class ScheduleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    enabled: bool = True
    period: int = 4000
    p0: float = 0.05
    dp: float = 0.05
    p_max: float = 1.0
    depth: Optional[int] = None  # None -> per-domain default


class EnvConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    graph_path: Optional[str] = None     # epidemic: edge-list file
    synth_nodes: int = 100               # epidemic: synthetic graph size
    synth_degree: int = 6
    quarantine_cost: float = 0.10
    vaccinate_cost: float = 0.05
    initial_exposed_fraction: float = 0.05
    reward_levels: int = 64
    params: dict = Field(default_factory=dict)  # dynamics overrides


class AgentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    horizon: Optional[int] = None
    simulations: Optional[int] = None
    epsilon0: Optional[float] = None
    epsilon_decay: Optional[float] = None
    eta: float = 1.0
    epsilon_floor: float = 0.01
    max_specialists: int = 10
    adaptive: bool = True
    ucb_c: Optional[float] = None
    q_weight_floor: float = 0.01
    pretrain_window: int = 4000
    initial_models: int = 10
    # explicit starting pool: list of models, each a list of predicate spec docs
    initial_model_specs: Optional[list[list[dict]]] = None

    def build(self, domain: str) -> AgentConfig:
        h, sims, e0, dec = DOMAIN_DEFAULTS[domain]
        return AgentConfig(
            horizon=self.horizon if self.horizon is not None else h,
            simulations=self.simulations if self.simulations is not None else sims,
            epsilon0=self.epsilon0 if self.epsilon0 is not None else e0,
            epsilon_decay=self.epsilon_decay if self.epsilon_decay is not None else dec,
            eta=self.eta, epsilon_floor=self.epsilon_floor,
            max_specialists=self.max_specialists, adaptive=self.adaptive,
            ucb_c=self.ucb_c, q_weight_floor=self.q_weight_floor,
            pretrain_window=self.pretrain_window)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    domain: Literal["rps", "taxi", "epidemic"]
    steps: int
    seeds: list[int] = Field(default_factory=lambda: [0])
    agent: AgentSection = Field(default_factory=AgentSection)
    env: EnvConfig = Field(default_factory=EnvConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    injection_mode: Literal["simulated", "live", "both"] = "simulated"
    out_dir: str = "runs"
    smoothing_window: int = 500

    @model_validator(mode="after")
    def _check(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.smoothing_window < 1:
            raise ValueError("smoothing window must be positive")
        return self

    @property
    def schedule_depth(self) -> int:
        return self.schedule.depth or DEFAULT_DEPTHS[self.domain]

    def resolved_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True)


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON) config document."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return ExperimentConfig(**data)


_STREAMS = {"env": 1, "agent": 2, "predicate": 3, "injector": 4, "extra": 5}


def seed_streams(master: int) -> dict[str, int]:
    """Fan one master seed out into fixed named streams.

    Each consumer gets its own derived integer seed, so adding a consumer
    never perturbs the draws of existing ones.
    """
    out = {}
    for name, idx in _STREAMS.items():
        ss = np.random.SeedSequence((master, idx))
        out[name] = int(ss.generate_state(1)[0])
    return out
