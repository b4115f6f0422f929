"""Weighted predicate context trees and chained-tree abstract models.

A depth-d tree holds a KT estimator at every node and mixes, in closed
form, over every pruning of the depth-d template with prior 2**(-G(T)),
G(T) counting the pruning's nodes above the forced-leaf depth.  Chaining
k trees (tree m conditioned on the shared context plus the symbol's first
m bits) extends the mixture to k-bit symbols.

A Specialist bundles a predicate state abstraction with two chains: one
predicting the next abstract state given (state, action), one predicting
the reward given (state, action, next state).  All mutation goes through
an undo trail so planning rollouts can be reverted exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import binarize

__all__ = [
    "KtCounts",
    "ContextTree",
    "PhiBctwTree",
    "SymbolChain",
    "Specialist",
    "coding_length",
    "pack_bits",
    "unpack_bits",
]


def pack_bits(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def unpack_bits(value: int, width: int) -> np.ndarray:
    return binarize(value, width) if width > 0 else np.empty(0, dtype=np.int8)


@dataclass
class KtCounts:
    """Add-half estimator over a binary stream; reference implementation."""

    zeros: int = 0
    ones: int = 0
    log_prob: float = 0.0

    def predict(self, bit: int) -> float:
        n = self.zeros + self.ones
        c = self.ones if bit == 1 else self.zeros
        return (c + 0.5) / (n + 1.0)

    def update(self, bit: int) -> None:
        self.log_prob += math.log(self.predict(bit))
        if bit == 1:
            self.ones += 1
        else:
            self.zeros += 1


def coding_length(pst, depth: int) -> int:
    """Description length of an explicit pruning of the depth-``depth`` template.

    ``pst`` is ``None`` for a leaf or a ``(left, right)`` pair for a split.
    Every node strictly above ``depth`` costs one bit (its leaf/split
    choice); forced leaves at ``depth`` are free.
    """

    def walk(node, at):
        if at > depth:
            raise ValueError("tree deeper than template")
        if at == depth:
            if node is not None:
                raise ValueError("split below the template depth")
            return 0
        if node is None:
            return 1
        if not (isinstance(node, tuple) and len(node) == 2):
            raise ValueError("malformed tree node")
        return 1 + walk(node[0], at + 1) + walk(node[1], at + 1)

    return walk(pst, 0)


class Arena:
    """Struct-of-arrays node store shared by all trees of one model."""

    def __init__(self, n_roots: int, node_cap: int = 4096, trail_cap: int = 4096,
                 op_cap: int = 1024):
        node_cap = max(node_cap, n_roots + 64)
        self.zeros = np.zeros(node_cap, dtype=np.int32)
        self.ones = np.zeros(node_cap, dtype=np.int32)
        self.lkt = np.zeros(node_cap, dtype=np.float64)
        self.lw = np.zeros(node_cap, dtype=np.float64)
        self.c0 = np.full(node_cap, -1, dtype=np.int32)
        self.c1 = np.full(node_cap, -1, dtype=np.int32)
        self.t_node = np.zeros(trail_cap, dtype=np.int32)
        self.t_zeros = np.zeros(trail_cap, dtype=np.int32)
        self.t_ones = np.zeros(trail_cap, dtype=np.int32)
        self.t_lkt = np.zeros(trail_cap, dtype=np.float64)
        self.t_lw = np.zeros(trail_cap, dtype=np.float64)
        self.t_c0 = np.zeros(trail_cap, dtype=np.int32)
        self.t_c1 = np.zeros(trail_cap, dtype=np.int32)
        self.o_trail = np.zeros(op_cap, dtype=np.int64)
        self.o_nodes = np.zeros(op_cap, dtype=np.int64)
        self.meta = np.zeros(4, dtype=np.int64)
        self.meta[K.M_NNODES] = n_roots
        self.meta[K.M_RECORD] = 1
        self.roots = np.arange(n_roots, dtype=np.int32)
        self._path = np.zeros(K.MAX_DEPTH, dtype=np.int64)

    # -- capacity -------------------------------------------------------
    def _grow(self, name: str, need: int) -> None:
        arr = getattr(self, name)
        if need <= arr.shape[0]:
            return
        cap = arr.shape[0]
        while cap < need:
            cap *= 2
        fill = -1 if name in ("c0", "c1") else 0
        new = np.full(cap, fill, dtype=arr.dtype) if fill else np.zeros(cap, dtype=arr.dtype)
        new[:arr.shape[0]] = arr
        setattr(self, name, new)

    def ensure(self, ops: int, path_budget: int) -> None:
        """Reserve room for ``ops`` bit updates of path length <= path_budget.

        Fast path is three integer compares; growth is rare and amortized.
        """
        budget = ops * path_budget
        if self.meta[K.M_NNODES] + budget > self.zeros.shape[0]:
            need = int(self.meta[K.M_NNODES]) + budget
            for nm in ("zeros", "ones", "lkt", "lw", "c0", "c1"):
                self._grow(nm, need)
        if self.meta[K.M_RECORD] == 1:
            if self.meta[K.M_TRAIL] + budget > self.t_node.shape[0]:
                need = int(self.meta[K.M_TRAIL]) + budget
                for nm in ("t_node", "t_zeros", "t_ones", "t_lkt", "t_lw", "t_c0", "t_c1"):
                    self._grow(nm, need)
            if self.meta[K.M_OPLOG] + ops > self.o_trail.shape[0]:
                need = int(self.meta[K.M_OPLOG]) + ops
                for nm in ("o_trail", "o_nodes"):
                    self._grow(nm, need)

    # -- bookkeeping ----------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return int(self.meta[K.M_NNODES])

    @property
    def n_ops(self) -> int:
        return int(self.meta[K.M_OPLOG])

    def set_recording(self, on: bool) -> None:
        if not on and self.meta[K.M_OPLOG]:
            # dropping the trail invalidates existing marks
            self.meta[K.M_OPLOG] = 0
            self.meta[K.M_TRAIL] = 0
        self.meta[K.M_RECORD] = 1 if on else 0

    def mark(self) -> int:
        return self.n_ops

    def revert_to(self, mark: int) -> None:
        self.revert(self.n_ops - mark)

    def revert(self, n: int) -> None:
        if n < 0 or n > self.n_ops:
            raise ValueError(f"cannot revert {n} updates, trail holds {self.n_ops}")
        if n == 0:
            return
        K.revert_ops(self.zeros, self.ones, self.lkt, self.lw, self.c0, self.c1,
                     self.meta, self.t_node, self.t_zeros, self.t_ones, self.t_lkt,
                     self.t_lw, self.t_c0, self.t_c1, self.o_trail, self.o_nodes, n)

    def structural_hash(self) -> str:
        n = self.n_nodes
        h = hashlib.sha1()
        h.update(np.int64(n).tobytes())
        for arr in (self.zeros, self.ones, self.c0, self.c1):
            h.update(arr[:n].tobytes())
        for arr in (self.lkt, self.lw):
            h.update(arr[:n].tobytes())
        return h.hexdigest()

    # -- kernel plumbing --------------------------------------------------
    def _node_args(self):
        return (self.zeros, self.ones, self.lkt, self.lw, self.c0, self.c1)

    def _trail_args(self):
        return (self.t_node, self.t_zeros, self.t_ones, self.t_lkt, self.t_lw,
                self.t_c0, self.t_c1, self.o_trail, self.o_nodes)


class ContextTree:
    """One weighted context tree over explicit context bit-vectors."""

    def __init__(self, depth: int, arena: Arena | None = None, root: int = 0):
        if depth < 0 or depth > K.MAX_DEPTH - 2:
            raise ValueError(f"unsupported tree depth {depth}")
        self.depth = depth
        self.arena = arena if arena is not None else Arena(1)
        self.root = root

    def _ctx(self, context) -> np.ndarray:
        ctx = np.asarray(context, dtype=np.int8)
        if ctx.shape[0] != self.depth:
            raise ValueError(f"context length {ctx.shape[0]} != tree depth {self.depth}")
        return ctx

    def update(self, context, bit: int) -> None:
        ctx = self._ctx(context)
        a = self.arena
        a.ensure(1, self.depth + 1)
        K.update_bit(*a._node_args(), a.meta, *a._trail_args(),
                     self.root, ctx, self.depth, int(bit), a._path)

    def predict(self, context) -> tuple[float, float]:
        """(P(next=0), P(next=1)); both computed from the mixture ratio."""
        ctx = self._ctx(context)
        a = self.arena
        return K.predict_bit(*a._node_args(), self.root, ctx, self.depth, a._path)

    def revert(self, n_updates: int) -> None:
        self.arena.revert(n_updates)

    @property
    def log_weighted(self) -> float:
        return float(self.arena.lw[self.root])

    def structural_hash(self) -> str:
        return self.arena.structural_hash()


class PhiBctwTree(ContextTree):
    """Context tree whose path is computed by predicates over histories."""

    def __init__(self, predicates, arena: Arena | None = None, root: int = 0):
        super().__init__(len(predicates), arena, root)
        self.predicates = list(predicates)

    def context_of(self, h, seed: int = 0) -> np.ndarray:
        return np.array([p.eval(h, seed) for p in self.predicates], dtype=np.int8)

    def update_on(self, h, bit: int, seed: int = 0) -> None:
        self.update(self.context_of(h, seed), bit)

    def predict_on(self, h, seed: int = 0) -> tuple[float, float]:
        return self.predict(self.context_of(h, seed))


class SymbolChain:
    """k chained trees jointly modelling a k-bit symbol in one context."""

    def __init__(self, width: int, ctx_len: int, arena: Arena, root_off: int):
        self.width = width
        self.ctx_len = ctx_len
        self.arena = arena
        self.root_off = root_off
        self._ctx_buf = np.zeros(ctx_len + width + 1, dtype=np.int8)
        self._bits = np.zeros(max(width, 1), dtype=np.int8)
        self._cond = np.zeros(max((1 << width) - 1, 1), dtype=np.float64)
        self._dist = np.zeros(1 << width, dtype=np.float64)

    @property
    def max_path(self) -> int:
        return self.ctx_len + self.width + 1

    def _fill_ctx(self, context) -> np.ndarray:
        if len(context) != self.ctx_len:
            raise ValueError(f"context length {len(context)} != {self.ctx_len}")
        self._ctx_buf[:self.ctx_len] = context
        return self._ctx_buf

    def observe(self, context, sym_bits) -> None:
        a = self.arena
        a.ensure(self.width, self.max_path)
        bits = np.asarray(sym_bits, dtype=np.int8)
        K.observe_symbol(*a._node_args(), a.meta, *a._trail_args(),
                         a.roots, self.root_off, self._fill_ctx(context),
                         self.ctx_len, bits, self.width, a._path)

    def sample(self, context, uniforms) -> tuple[int, np.ndarray]:
        a = self.arena
        a.ensure(self.width, self.max_path)
        sym = K.sample_symbol(*a._node_args(), a.meta, *a._trail_args(),
                              a.roots, self.root_off, self._fill_ctx(context),
                              self.ctx_len, self.width, uniforms, self._bits, a._path)
        return int(sym), self._bits[:self.width].copy()

    def distribution(self, context) -> np.ndarray:
        a = self.arena
        K.predict_symbol_dist(*a._node_args(), a.roots, self.root_off,
                              self._fill_ctx(context), self.ctx_len, self.width,
                              a._path, self._cond, self._dist)
        return self._dist.copy()

    def symbol_probability(self, context, symbol: int) -> float:
        """P(symbol) without materializing the full table."""
        a = self.arena
        ctx = self._fill_ctx(context)
        p = 1.0
        for m in range(self.width):
            bit = (symbol >> (self.width - 1 - m)) & 1
            p0, p1 = K.predict_bit(*a._node_args(), a.roots[self.root_off + m],
                                   ctx, self.ctx_len + m, a._path)
            p *= p1 if bit == 1 else (1.0 - p1)
            ctx[self.ctx_len + m] = bit
        return p


SNAPSHOT_VERSION = 1


class Specialist:
    """An abstract environment model: predicate abstraction + two chains.

    The state chain predicts the next abstract state's bits given
    [state bits, action bits]; the reward chain predicts reward bits given
    [state bits, action bits, next-state bits].  ``arrival``/``death``
    are maintained by the aggregator that owns the model's weight.
    """

    def __init__(self, spec_id: str, predicates, action_width: int,
                 reward_width: int, arrival: int = 0):
        self.id = spec_id
        self.predicates = list(predicates)
        self.state_width = len(self.predicates)
        self.action_width = action_width
        self.reward_width = reward_width
        self.arrival = arrival
        self.death: int | None = None
        d, aw, rw = self.state_width, action_width, reward_width
        self.arena = Arena(d + rw)
        self.state_chain = SymbolChain(d, d + aw, self.arena, 0)
        self.reward_chain = SymbolChain(rw, 2 * d + aw, self.arena, d)
        self._ws = np.zeros(2 * d + aw + rw + 1, dtype=np.int8)
        self._max_path = 2 * d + aw + rw + 1
        self._ops_per_step = d + rw

    # -- state abstraction ----------------------------------------------
    def phi(self, h, seed: int = 0) -> np.ndarray:
        return np.array([p.eval(h, seed) for p in self.predicates], dtype=np.int8)

    # -- contexts ----------------------------------------------------------
    def _sa_ctx(self, s_bits, a: int) -> np.ndarray:
        return np.concatenate([np.asarray(s_bits, dtype=np.int8),
                               binarize(a, self.action_width)])

    def _sas_ctx(self, s_bits, a: int, s2_bits) -> np.ndarray:
        return np.concatenate([np.asarray(s_bits, dtype=np.int8),
                               binarize(a, self.action_width),
                               np.asarray(s2_bits, dtype=np.int8)])

    # -- learning ----------------------------------------------------------
    def observe(self, s_bits, action: int, s_next_bits, r_symbol: int) -> None:
        self.state_chain.observe(self._sa_ctx(s_bits, action), s_next_bits)
        self.reward_chain.observe(self._sas_ctx(s_bits, action, s_next_bits),
                                  binarize(r_symbol, self.reward_width))

    def predict_reward(self, s_bits, action: int, s_next_bits) -> np.ndarray:
        """Distribution over all reward bit patterns; sums to 1."""
        return self.reward_chain.distribution(self._sas_ctx(s_bits, action, s_next_bits))

    def sample_packed(self, s_packed: int, action: int, rng) -> tuple[int, int]:
        """Draw (next state, reward symbol) as packed ints, updating chains.

        The caller owns the trail: wrap with mark()/revert_to() so planning
        rollouts leave the model unchanged.
        """
        a = self.arena
        a.ensure(self._ops_per_step, self._max_path)
        us = rng.random(self._ops_per_step)
        s2, r = K.sample_transition(*a._node_args(), a.meta, *a._trail_args(),
                                    a.roots, self.state_width, self.action_width,
                                    self.reward_width, s_packed, action,
                                    self._ws, us, a._path)
        return int(s2), int(r)

    def sample(self, s_bits, action: int, rng) -> tuple[np.ndarray, int]:
        """Array-interface variant of :meth:`sample_packed`."""
        s2, r = self.sample_packed(pack_bits(s_bits), action, rng)
        return unpack_bits(s2, self.state_width), r

    # -- trail -------------------------------------------------------------
    def mark(self) -> int:
        return self.arena.mark()

    def revert_to(self, mark: int) -> None:
        self.arena.revert_to(mark)

    def set_recording(self, on: bool) -> None:
        self.arena.set_recording(on)

    def structural_hash(self) -> str:
        return self.arena.structural_hash()

    # -- snapshot ------------------------------------------------------------
    def save(self, path) -> None:
        a = self.arena
        n = a.n_nodes
        layout = {
            "version": SNAPSHOT_VERSION,
            "id": self.id,
            "action_width": self.action_width,
            "reward_width": self.reward_width,
            "arrival": self.arrival,
            "predicates": [p.spec.to_json() if hasattr(p, "spec") else None
                           for p in self.predicates],
        }
        np.savez(path, layout=json.dumps(layout),
                 zeros=a.zeros[:n], ones=a.ones[:n], lkt=a.lkt[:n], lw=a.lw[:n],
                 c0=a.c0[:n], c1=a.c1[:n], roots=a.roots)

    @classmethod
    def load(cls, path, predicates) -> "Specialist":
        data = np.load(path, allow_pickle=False)
        layout = json.loads(str(data["layout"]))
        if layout["version"] != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {layout['version']}")
        sp = cls(layout["id"], predicates, layout["action_width"],
                 layout["reward_width"], layout["arrival"])
        n = data["zeros"].shape[0]
        a = sp.arena
        for nm in ("zeros", "ones", "lkt", "lw", "c0", "c1"):
            a._grow(nm, n)
            getattr(a, nm)[:n] = data[nm]
        a.meta[K.M_NNODES] = n
        return sp
