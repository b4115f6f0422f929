"""Predicate specs, deterministic ids, and the constructor registry.

A predicate is a pure boolean function of a history; randomized ones draw
from a stream fixed by (run seed, predicate identity, history length), so
re-evaluating at the same time step always returns the same bit.  Specs
serialize to canonical JSON (sorted keys) and round-trip losslessly,
which is what the injection endpoints and config files exchange.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

__all__ = [
    "PredicateSpec",
    "Predicate",
    "Registry",
    "UnknownConstructorError",
    "PredicateParamError",
    "build_from_spec",
    "stable_unit",
]

_M64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    x &= _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def stable_unit(*keys: int) -> float:
    """Deterministic uniform in [0, 1) from integer keys (order matters)."""
    h = 0x9E3779B97F4A7C15
    for k in keys:
        h = _mix64(h ^ (k & _M64))
    return (h >> 11) / float(1 << 53)


class UnknownConstructorError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown predicate constructor {self.name!r}"


class PredicateParamError(ValueError):
    def __init__(self, constructor: str, problems: dict[str, str]):
        self.constructor = constructor
        self.problems = dict(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in sorted(problems.items()))
        super().__init__(f"{constructor}: invalid params ({msg})")


@dataclass(frozen=True)
class PredicateSpec:
    constructor: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        """Canonical text encoding: sorted keys, full float precision."""
        return json.dumps({"constructor": self.constructor, "params": self.params},
                          sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "PredicateSpec":
        data = json.loads(text)
        if set(data) != {"constructor", "params"}:
            raise ValueError(f"spec document must have constructor+params, got {sorted(data)}")
        return cls(constructor=data["constructor"], params=data["params"])

    @property
    def id(self) -> str:
        digest = hashlib.sha1(self.to_json().encode()).hexdigest()[:10]
        return f"{self.constructor}-{digest}"

    def __eq__(self, other):
        return isinstance(other, PredicateSpec) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(self.to_json())


class Predicate:
    """A named pure boolean function of histories."""

    def __init__(self, spec: PredicateSpec, fn):
        self.spec = spec
        self.id = spec.id
        self._fn = fn
        self._salt = int(hashlib.sha1(self.id.encode()).hexdigest()[:16], 16)

    def eval(self, h, seed: int = 0) -> int:
        return int(self._fn(h, seed, self._salt))

    def __repr__(self):
        return f"Predicate({self.id})"


class Registry:
    """Constructor table plus the domain context predicates may consume.

    ``context`` carries whatever the domain's constructors need (the
    contact graph, dynamics parameters, observation decoders); it is
    injected here so specs stay small, portable documents.
    """

    def __init__(self, context: dict | None = None):
        self.context = context or {}
        self._builders: dict[str, tuple] = {}
        self._memo: dict[str, Predicate] = {}

    def register(self, name: str, builder, param_schema: dict[str, str]) -> None:
        if name in self._builders:
            raise ValueError(f"constructor {name!r} already registered")
        self._builders[name] = (builder, param_schema)

    @property
    def constructors(self) -> list[str]:
        return sorted(self._builders)

    def manifest(self) -> dict:
        """Constructor names and parameter hints, for operator consoles."""
        return {name: {"params": schema} for name, (_, schema) in
                sorted(self._builders.items())}

    def validate(self, spec: PredicateSpec) -> None:
        """Raise on unknown constructor or malformed params, else no-op."""
        if spec.constructor not in self._builders:
            raise UnknownConstructorError(spec.constructor)
        self.build(spec)

    def build(self, spec: PredicateSpec) -> Predicate:
        if spec.constructor not in self._builders:
            raise UnknownConstructorError(spec.constructor)
        key = spec.id
        if key in self._memo:
            return self._memo[key]
        builder, _ = self._builders[spec.constructor]
        pred = Predicate(spec, builder(spec.params, self))
        self._memo[key] = pred
        return pred


def build_from_spec(spec: PredicateSpec, registry: Registry) -> Predicate:
    return registry.build(spec)


def check_params(constructor: str, params: dict, required: dict, optional: dict) -> dict:
    """Validate a params dict against {key: checker} tables.

    Checkers return an error string or None.  Returns params merged with
    optional defaults.  Collects every offence so rejections name all
    offending keys at once.
    """
    problems = {}
    merged = {}
    for key, (default, checker) in optional.items():
        merged[key] = params.get(key, default)
    for key, checker in required.items():
        if key not in params:
            problems[key] = "missing"
        else:
            merged[key] = params[key]
    for key in params:
        if key not in required and key not in optional:
            problems[key] = "unknown parameter"
    for key, checker in required.items():
        if key in merged:
            err = checker(merged[key])
            if err:
                problems[key] = err
    for key, (default, checker) in optional.items():
        err = checker(merged[key])
        if err:
            problems[key] = err
    if problems:
        raise PredicateParamError(constructor, problems)
    return merged
