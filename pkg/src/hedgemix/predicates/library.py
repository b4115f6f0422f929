"""Domain predicate constructors and per-domain registries.

Constructor params are plain JSON values; anything heavyweight (the
contact graph, dynamics parameters, observation decoders) comes from the
registry context, so serialized specs stay portable across processes.
"""

from __future__ import annotations

import json

import numpy as np

from ..envs.epidemic import OBS_POS, OBS_UNK, EpidemicParams
from ..envs.taxi import CORNERS, unpack_obs
from .base import (
    PredicateParamError,
    PredicateSpec,
    Registry,
    check_params,
    stable_unit,
)
from .combinators import (
    bit_of,
    encode_bucket,
    ma_reward,
    percent_action,
    rate_of_change,
)
from .particles import SeirsBeliefFilter

__all__ = [
    "register_general",
    "register_rps",
    "register_taxi",
    "register_epidemic",
    "registry_for_domain",
]


# -- param checkers ---------------------------------------------------------

def _prob(v):
    return None if isinstance(v, (int, float)) and 0.0 <= v <= 1.0 else "must be a probability in [0, 1]"


def _pos_int(v):
    return None if isinstance(v, int) and v >= 1 else "must be a positive integer"


def _nonneg_int(v):
    return None if isinstance(v, int) and v >= 0 else "must be a non-negative integer"


def _number(v):
    return None if isinstance(v, (int, float)) else "must be a number"


def _any(v):
    return None


def _choice(*opts):
    def check(v):
        return None if v in opts else f"must be one of {opts}"
    return check


def _int_list(v):
    if isinstance(v, list) and v and all(isinstance(x, int) and x >= 0 for x in v):
        return None
    return "must be a non-empty list of non-negative integers"


def _bit_mode(constructor: str, p: dict) -> str:
    """Rate predicates take either a comparison or an encoded-bit reading."""
    has_cmp = "op" in p or "thresh" in p
    has_bit = "bits" in p or "bit" in p
    if has_cmp == has_bit:
        raise PredicateParamError(constructor, {
            "op/thresh": "give either a comparison (op, thresh)",
            "bits/bit": "or an encoded bit position (bits, bit), not both/neither"})
    return "cmp" if has_cmp else "bit"


def _compare(op: str, value: float, thresh: float) -> int:
    return int(value >= thresh) if op == "geq" else int(value <= thresh)


def _rate_predicate(constructor: str, params: dict, lo: float, hi: float,
                    default_bits: int, rate_fn):
    """Wire a real-valued history statistic into a boolean reading.

    ``rate_fn(h, seed, salt)`` returns the statistic or None when the
    history is too short (the documented default-0 case).
    """
    mode = _bit_mode(constructor, params)
    if mode == "cmp":
        merged = check_params(constructor, {k: v for k, v in params.items()
                                            if k in ("op", "thresh")},
                              {"op": _choice("geq", "leq"), "thresh": _number}, {})
        op, thresh = merged["op"], merged["thresh"]

        def fn(h, seed, salt):
            v = rate_fn(h, seed, salt)
            return 0 if v is None else _compare(op, v, thresh)
        return fn
    merged = check_params(constructor, {k: v for k, v in params.items()
                                        if k in ("bits", "bit")},
                          {"bit": _pos_int}, {"bits": (default_bits, _pos_int)})
    bits, biti = merged["bits"], merged["bit"]
    if biti > bits:
        raise PredicateParamError(constructor, {"bit": f"must be <= bits ({bits})"})

    def fn(h, seed, salt):
        v = rate_fn(h, seed, salt)
        return 0 if v is None else bit_of(encode_bucket(v, lo, hi, bits), biti, bits)
    return fn


def _strip_mode_keys(params: dict) -> dict:
    return {k: v for k, v in params.items() if k not in ("op", "thresh", "bits", "bit")}


# -- general ------------------------------------------------------------------

def register_general(reg: Registry) -> None:
    def build_random_bit(params, _reg):
        p = check_params("RandomBit", params,
                         {"p": _prob}, {"salt": (0, _nonneg_int)})
        prob = p["p"]

        def fn(h, seed, salt):
            return int(stable_unit(seed, salt, len(h)) < prob)
        return fn

    reg.register("RandomBit", build_random_bit,
                 {"p": "probability of returning 1", "salt": "distinguishes copies"})

    def build_randomize(params, reg_):
        p = check_params("Randomize", params, {"p": _prob, "inner": _any}, {})
        inner_raw = p["inner"]
        if not (isinstance(inner_raw, dict) and set(inner_raw) == {"constructor", "params"}):
            raise PredicateParamError("Randomize",
                                      {"inner": "must be a {constructor, params} spec"})
        inner = reg_.build(PredicateSpec(inner_raw["constructor"], inner_raw["params"]))
        keep = p["p"]

        def fn(h, seed, salt):
            bit = inner.eval(h, seed)
            return bit if stable_unit(seed, salt, len(h)) < keep else 1 - bit
        return fn

    reg.register("Randomize", build_randomize,
                 {"p": "probability of passing the inner bit through unchanged",
                  "inner": "spec of the predicate to noise"})


# -- rock-paper-scissors ------------------------------------------------------

def register_rps(reg: Registry) -> None:
    def build_is_rock(params, _reg):
        p = check_params("IsRock", params, {}, {"lag": (1, _pos_int)})
        lag = p["lag"]

        def fn(h, seed, salt):
            return int(len(h) >= lag and h.obs(len(h) - lag) == 0)
        return fn

    reg.register("IsRock", build_is_rock,
                 {"lag": "how many steps back to look (default 1)"})

    def build_is_lose(params, _reg):
        p = check_params("IsLose", params, {}, {"lag": (1, _pos_int)})
        lag = p["lag"]

        def fn(h, seed, salt):
            return int(len(h) >= lag and h.reward_value(len(h) - lag) < 0)
        return fn

    reg.register("IsLose", build_is_lose,
                 {"lag": "how many steps back to look (default 1)"})


# -- taxi -----------------------------------------------------------------------

_TAXI_RANGES = {"x": (-1.0, 1.0), "y": (-4.0, 4.0)}


def register_taxi(reg: Registry) -> None:
    def build_dist_bit(params, _reg):
        p = check_params("TaxiDistBit", params,
                         {"target": _choice("passenger", "destination"),
                          "axis": _choice("x", "y"),
                          "bit": _pos_int},
                         {"bits": (None, lambda v: None if v is None else _pos_int(v))})
        axis = p["axis"]
        bits = p["bits"] if p["bits"] is not None else (2 if axis == "x" else 3)
        if p["bit"] > bits:
            raise PredicateParamError("TaxiDistBit", {"bit": f"must be <= bits ({bits})"})
        target, biti = p["target"], p["bit"]
        lo, hi = _TAXI_RANGES[axis]

        def fn(h, seed, salt):
            if len(h) == 0:
                return 0
            x, y, pp, d, in_taxi = unpack_obs(h.obs(len(h) - 1))
            if target == "passenger":
                tx, ty = (x, y) if pp == 4 else CORNERS[pp]
            else:
                tx, ty = CORNERS[d]
            dist = (tx - x) if axis == "x" else (ty - y)
            return bit_of(encode_bucket(dist, lo, hi, bits), biti, bits)
        return fn

    reg.register("TaxiDistBit", build_dist_bit,
                 {"target": "'passenger' or 'destination'", "axis": "'x' or 'y'",
                  "bits": "bucket bits (default: 2 for x, 3 for y)",
                  "bit": "1-indexed bit of the bucket index, MSB first"})

    def build_picked_up(params, _reg):
        check_params("PassengerPickedUp", params, {}, {})

        def fn(h, seed, salt):
            if len(h) == 0:
                return 0
            return unpack_obs(h.obs(len(h) - 1))[4]
        return fn

    reg.register("PassengerPickedUp", build_picked_up, {})

    def build_suffix_bit(params, _reg):
        p = check_params("SuffixBit", params, {"n": _pos_int}, {})
        n = p["n"]

        def fn(h, seed, salt):
            return h.suffix_bit(n)
        return fn

    reg.register("SuffixBit", build_suffix_bit,
                 {"n": "bit position counting back from the end of the bit view"})


# -- epidemic ---------------------------------------------------------------------

def _resolve_nodes(nodes, graph):
    if nodes == "all":
        return np.arange(graph.n)
    if isinstance(nodes, dict) and set(nodes) == {"top_frac"}:
        return graph.top_fraction(nodes["top_frac"])
    if isinstance(nodes, list):
        return np.array(nodes, dtype=np.int64)
    raise PredicateParamError("nodes", {"nodes": "must be 'all', {'top_frac': f} or a list"})


def _nodes_checker(v):
    if v == "all" or isinstance(v, list):
        return None
    if isinstance(v, dict) and set(v) == {"top_frac"} and _prob(v["top_frac"]) is None:
        return None
    return "must be 'all', {'top_frac': f} or a list of node ids"


def register_epidemic(reg: Registry) -> None:
    graph = reg.context["graph"]

    def naive_rate(h, at, node_ids, c):
        obs = np.asarray(h.obs(at), dtype=np.int8)[node_ids]
        pos = int((obs == OBS_POS).sum())
        unk = int((obs == OBS_UNK).sum())
        return (pos + c * unk) / len(node_ids)

    def build_naive_rate(params, _reg):
        base = check_params("NaiveInfectionRate", _strip_mode_keys(params),
                            {}, {"nodes": ("all", _nodes_checker),
                                 "unknown_weight": (0.3, _prob)})
        node_ids = _resolve_nodes(base["nodes"], graph)
        c = base["unknown_weight"]

        def rate(h, seed, salt):
            return None if len(h) == 0 else naive_rate(h, len(h) - 1, node_ids, c)
        return _rate_predicate("NaiveInfectionRate", params, 0.0, 1.0, 5, rate)

    reg.register("NaiveInfectionRate", build_naive_rate,
                 {"nodes": "'all', {'top_frac': f} or node id list",
                  "unknown_weight": "weight of untested nodes (default 0.3)",
                  "op": "'geq'/'leq' (comparison mode)", "thresh": "threshold",
                  "bits": "bucket bits (default 5)", "bit": "1-indexed bucket bit"})

    def build_rate_change(params, _reg):
        base = check_params("InfectionRateOfChange", _strip_mode_keys(params),
                            {}, {"nodes": ("all", _nodes_checker),
                                 "unknown_weight": (0.3, _prob)})
        node_ids = _resolve_nodes(base["nodes"], graph)
        c = base["unknown_weight"]

        def rate(h, seed, salt):
            if len(h) < 2:
                return None
            return (naive_rate(h, len(h) - 1, node_ids, c)
                    - naive_rate(h, len(h) - 2, node_ids, c))
        return _rate_predicate("InfectionRateOfChange", params, -1.0, 1.0, 7, rate)

    reg.register("InfectionRateOfChange", build_rate_change,
                 {"nodes": "'all', {'top_frac': f} or node id list",
                  "unknown_weight": "weight of untested nodes (default 0.3)",
                  "op": "'geq'/'leq' (comparison mode)", "thresh": "threshold",
                  "bits": "bucket bits (default 7)", "bit": "1-indexed bucket bit"})

    def build_percent_action(params, _reg):
        base = check_params("PercentAction", _strip_mode_keys(params),
                            {"a": _nonneg_int, "N": _pos_int}, {})
        a, n = base["a"], base["N"]

        def rate(h, seed, salt):
            return None if len(h) == 0 else percent_action(h, a, n)
        return _rate_predicate("PercentAction", params, 0.0, 1.0, 8, rate)

    reg.register("PercentAction", build_percent_action,
                 {"a": "action index", "N": "window length",
                  "op": "'geq'/'leq' (comparison mode)", "thresh": "threshold",
                  "bits": "bucket bits (default 8)", "bit": "1-indexed bucket bit"})

    def build_action_seq(params, _reg):
        p = check_params("ActionSequenceIndicator", params, {"seq": _int_list}, {})
        seq = p["seq"]
        k = len(seq)

        def fn(h, seed, salt):
            return int(len(h) >= k and h.recent_actions(k) == seq)
        return fn

    reg.register("ActionSequenceIndicator", build_action_seq,
                 {"seq": "exact sequence the last k actions must equal"})

    def build_ma_ratio(params, _reg):
        p = check_params("MARewardRatio", params,
                         {"w1": _pos_int, "w2": _pos_int},
                         {"thresh": (1.0, _number)})
        w1, w2, thresh = p["w1"], p["w2"], p["thresh"]

        def fn(h, seed, salt):
            if len(h) == 0:
                return 0
            ratio = rate_of_change(ma_reward(h, w1), ma_reward(h, w2))
            return 0 if ratio is None else int(ratio >= thresh)
        return fn

    reg.register("MARewardRatio", build_ma_ratio,
                 {"w1": "numerator moving-average window",
                  "w2": "denominator moving-average window",
                  "thresh": "ratio threshold (default 1.0)"})

    def build_particle_rate(params, _reg):
        base = check_params("ParticleInfRateBit", _strip_mode_keys(params),
                            {}, {"theta": ({}, _any), "m": (100, _pos_int)})
        theta = dict(base["theta"]) if isinstance(base["theta"], dict) else None
        if theta is None:
            raise PredicateParamError("ParticleInfRateBit",
                                      {"theta": "must be a parameter dict"})
        init_e = theta.pop("initial_exposed", 0.05)
        init_i = theta.pop("initial_infectious", 0.0)
        try:
            pf_params = EpidemicParams(**{**_reg.context["params"].__dict__, **theta})
        except (TypeError, ValueError) as err:
            raise PredicateParamError("ParticleInfRateBit", {"theta": str(err)})
        key = json.dumps({"theta": sorted(theta.items()), "m": base["m"],
                          "e": init_e, "i": init_i}, default=str, sort_keys=True)
        cache = _reg.context.setdefault("_pf_cache", {})
        if key not in cache:
            cache[key] = SeirsBeliefFilter(graph, pf_params, base["m"],
                                           initial_exposed=init_e,
                                           initial_infectious=init_i)
        pf = cache[key]
        pf_salt = hash(key) & ((1 << 63) - 1)

        def rate(h, seed, salt):
            return pf.infection_rate(h, seed, pf_salt)
        return _rate_predicate("ParticleInfRateBit", params, 0.0, 1.0, 5, rate)

    reg.register("ParticleInfRateBit", build_particle_rate,
                 {"theta": "dynamics parameter overrides for the filter",
                  "m": "particle count (default 100)",
                  "op": "'geq'/'leq' (comparison mode)", "thresh": "threshold",
                  "bits": "bucket bits (default 5)", "bit": "1-indexed bucket bit"})


def registry_for_domain(domain: str, graph=None, params=None) -> Registry:
    """Build the constructor registry (with context) for one domain."""
    if domain == "rps":
        reg = Registry()
        register_general(reg)
        register_rps(reg)
    elif domain == "taxi":
        reg = Registry()
        register_general(reg)
        register_taxi(reg)
    elif domain == "epidemic":
        if graph is None:
            raise ValueError("epidemic registry needs the contact graph")
        reg = Registry({"graph": graph, "params": params or EpidemicParams()})
        register_general(reg)
        register_epidemic(reg)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return reg
