from .base import (
    Predicate,
    PredicateParamError,
    PredicateSpec,
    Registry,
    UnknownConstructorError,
    build_from_spec,
    stable_unit,
)
from .combinators import (
    bit_of,
    compose,
    encode_bucket,
    eq_one,
    geq,
    ma_reward,
    percent_action,
    rate_of_change,
)
from .library import registry_for_domain
from .particles import SeirsBeliefFilter
from .pools import PredicatePools, default_pools

__all__ = [
    "Predicate",
    "PredicateParamError",
    "PredicateSpec",
    "Registry",
    "UnknownConstructorError",
    "build_from_spec",
    "stable_unit",
    "compose",
    "encode_bucket",
    "bit_of",
    "eq_one",
    "geq",
    "ma_reward",
    "percent_action",
    "rate_of_change",
    "registry_for_domain",
    "SeirsBeliefFilter",
    "PredicatePools",
    "default_pools",
]
