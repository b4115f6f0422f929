"""Default informative/uninformative predicate pools per domain.

The informative side holds the predicates known to help represent each
task; the uninformative side holds coin-flip bits and noised copies of
informative predicates.  Exact enumerations (windows, thresholds, bit
positions) are this artifact's documented defaults and are configurable
at the call sites that build pools.
"""

from __future__ import annotations

from dataclasses import dataclass

from .base import PredicateSpec

__all__ = ["PredicatePools", "default_pools"]


@dataclass(frozen=True)
class PredicatePools:
    informative: tuple
    uninformative: tuple

    def __post_init__(self):
        ids_i = {s.id for s in self.informative}
        ids_u = {s.id for s in self.uninformative}
        if not self.informative:
            raise ValueError("informative pool must be non-empty")
        if ids_i & ids_u:
            raise ValueError(f"pools overlap: {sorted(ids_i & ids_u)}")
        if len(ids_i) != len(self.informative) or len(ids_u) != len(self.uninformative):
            raise ValueError("duplicate predicate ids within a pool")


def _noised(spec: PredicateSpec, keep: float = 0.7) -> PredicateSpec:
    return PredicateSpec("Randomize", {"p": keep, "inner": {
        "constructor": spec.constructor, "params": spec.params}})


def _random_bits(count: int) -> list[PredicateSpec]:
    return [PredicateSpec("RandomBit", {"p": 0.5, "salt": k}) for k in range(count)]


def _rps_pools() -> PredicatePools:
    informative = (
        PredicateSpec("IsRock", {}),
        PredicateSpec("IsLose", {}),
    )
    uninformative = tuple(_random_bits(4)) + tuple(_noised(s) for s in informative)
    return PredicatePools(informative, uninformative)


def _taxi_pools() -> PredicatePools:
    informative = []
    for target in ("passenger", "destination"):
        for i in (1, 2):
            informative.append(PredicateSpec(
                "TaxiDistBit", {"target": target, "axis": "x", "bit": i}))
        for i in (1, 2, 3):
            informative.append(PredicateSpec(
                "TaxiDistBit", {"target": target, "axis": "y", "bit": i}))
    informative.append(PredicateSpec("PassengerPickedUp", {}))
    # bits 3-8 counting back: in-taxi flag, destination corner, passenger slot
    for n in range(3, 9):
        informative.append(PredicateSpec("SuffixBit", {"n": n}))
    assert len(informative) == 17
    uninformative = tuple(_random_bits(10)) + tuple(
        _noised(s) for s in informative[:8])
    return PredicatePools(tuple(informative), uninformative)


def _epidemic_pools() -> PredicatePools:
    informative = []
    for i in range(1, 6):
        informative.append(PredicateSpec(
            "NaiveInfectionRate", {"nodes": "all", "bits": 5, "bit": i}))
    for i in range(1, 4):
        informative.append(PredicateSpec(
            "InfectionRateOfChange", {"nodes": "all", "bits": 7, "bit": i}))
    informative.append(PredicateSpec(
        "PercentAction", {"a": 0, "N": 10, "op": "geq", "thresh": 0.5}))
    informative.append(PredicateSpec(
        "PercentAction", {"a": 5, "N": 10, "op": "geq", "thresh": 0.3}))
    informative.append(PredicateSpec("ActionSequenceIndicator", {"seq": [5]}))
    informative.append(PredicateSpec("ActionSequenceIndicator", {"seq": [5, 5]}))
    informative.append(PredicateSpec("MARewardRatio", {"w1": 10, "w2": 50}))
    informative.append(PredicateSpec("MARewardRatio", {"w1": 5, "w2": 20}))
    for i in range(1, 6):
        informative.append(PredicateSpec(
            "ParticleInfRateBit", {"theta": {}, "m": 100, "bits": 5, "bit": i}))
    informative.append(PredicateSpec(
        "NaiveInfectionRate", {"nodes": {"top_frac": 0.2}, "bits": 5, "bit": 1}))
    assert len(informative) == 20
    noised = [s for s in informative
              if s.constructor in ("NaiveInfectionRate", "InfectionRateOfChange")]
    uninformative = tuple(_random_bits(12)) + tuple(_noised(s) for s in noised[:8])
    return PredicatePools(tuple(informative), uninformative)


def default_pools(domain: str) -> PredicatePools:
    if domain == "rps":
        return _rps_pools()
    if domain == "taxi":
        return _taxi_pools()
    if domain == "epidemic":
        return _epidemic_pools()
    raise ValueError(f"unknown domain {domain!r}")
