"""Wire models for the run-control HTTP API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class PredicateSpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    constructor: str
    params: dict = Field(default_factory=dict)


class PoolEntryModel(BaseModel):
    id: str
    arrival: int
    weight: float


class RewardStats(BaseModel):
    last: Optional[float] = None
    smoothed: Optional[float] = None


class StatusResponse(BaseModel):
    t: int
    steps_total: int
    paused: bool
    finished: bool
    epsilon: float
    domain: str
    reward: RewardStats
    pool: list[PoolEntryModel]
    last_event_id: int
    registry: dict


class InjectRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    predicates: list[PredicateSpecModel]
    pretrain: bool = True
    drop: Optional[str] = None  # "lowest" or an explicit model id


class InjectResponse(BaseModel):
    specialist_id: str
    applied_at: int


class RetireRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    specialist_id: str


class RetireResponse(BaseModel):
    specialist_id: str
    applied_at: int


class ControlResponse(BaseModel):
    t: int
    paused: bool
    finished: bool
