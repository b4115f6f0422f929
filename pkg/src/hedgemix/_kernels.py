"""Flat-array kernels for weighted context trees.

All trees of one model live in a single node arena (struct-of-arrays) so
updates, reverts and sampling run as compiled loops.  Node allocation is
append-only; the undo trail stores full pre-update node records, which
makes revert an exact inverse (bit-identical floats) and lets truncation
reclaim nodes created inside a reverted span.

Set HEDGEMIX_NO_NUMBA=1 to run the same code uncompiled (slow; used to
debug kernel logic).
"""

from __future__ import annotations

import math
import os

import numpy as np

if os.environ.get("HEDGEMIX_NO_NUMBA"):
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap
else:
    from numba import njit  # type: ignore

LOG_HALF = math.log(0.5)

# meta slots
M_NNODES = 0
M_TRAIL = 1
M_OPLOG = 2
M_RECORD = 3

MAX_DEPTH = 128


@njit(cache=True, nogil=True)
def _lse(a, b):
    """log(exp(a) + exp(b)) without ufunc dispatch."""
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@njit(cache=True, nogil=True)
def _kt_log_p(zeros, ones, node, bit):
    n = zeros[node] + ones[node]
    c = ones[node] if bit == 1 else zeros[node]
    return math.log((c + 0.5) / (n + 1.0))


@njit(cache=True, nogil=True)
def _child(c0, c1, node, b):
    return c0[node] if b == 0 else c1[node]


@njit(cache=True, nogil=True)
def _snapshot_node(zeros, ones, lkt, lw, c0, c1, meta,
                   t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1, nd):
    """Record one node's pre-touch state (values and child pointers)."""
    tl = meta[M_TRAIL]
    t_node[tl] = nd
    t_zeros[tl] = zeros[nd]
    t_ones[tl] = ones[nd]
    t_lkt[tl] = lkt[nd]
    t_lw[tl] = lw[nd]
    t_c0[tl] = c0[nd]
    t_c1[tl] = c1[nd]
    meta[M_TRAIL] = tl + 1


@njit(cache=True, nogil=True)
def _walk_create(zeros, ones, lkt, lw, c0, c1, meta,
                 t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                 o_trail, o_nodes, root, ctx, ctx_len, path):
    """Follow ``ctx`` from ``root`` creating missing nodes; fill ``path``.

    When recording, opens one op-log entry and snapshots every
    pre-existing node on the path before it is modified; nodes created
    here need no snapshot because revert truncates them away.
    """
    record = meta[M_RECORD] == 1
    n = meta[M_NNODES]
    if record:
        op = meta[M_OPLOG]
        o_trail[op] = meta[M_TRAIL]
        o_nodes[op] = n
        meta[M_OPLOG] = op + 1
        _snapshot_node(zeros, ones, lkt, lw, c0, c1, meta,
                       t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1, root)
    path[0] = root
    for j in range(ctx_len):
        node = path[j]
        b = ctx[j]
        child = _child(c0, c1, node, b)
        if child < 0:
            child = n
            zeros[child] = 0
            ones[child] = 0
            lkt[child] = 0.0
            lw[child] = 0.0
            c0[child] = -1
            c1[child] = -1
            if b == 0:
                c0[node] = child
            else:
                c1[node] = child
            n += 1
        elif record:
            _snapshot_node(zeros, ones, lkt, lw, c0, c1, meta,
                           t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1, child)
        path[j + 1] = child
    meta[M_NNODES] = n


@njit(cache=True, nogil=True)
def _apply_bit(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, bit):
    """KT + weighted-probability update along ``path``, leaf to root."""
    leaf = path[ctx_len]
    lkt[leaf] += _kt_log_p(zeros, ones, leaf, bit)
    if bit == 1:
        ones[leaf] += 1
    else:
        zeros[leaf] += 1
    lw[leaf] = lkt[leaf]
    for j in range(ctx_len - 1, -1, -1):
        node = path[j]
        lkt[node] += _kt_log_p(zeros, ones, node, bit)
        if bit == 1:
            ones[node] += 1
        else:
            zeros[node] += 1
        ch0 = c0[node]
        ch1 = c1[node]
        l0 = lw[ch0] if ch0 >= 0 else 0.0
        l1 = lw[ch1] if ch1 >= 0 else 0.0
        lw[node] = _lse(LOG_HALF + lkt[node], LOG_HALF + l0 + l1)


@njit(cache=True, nogil=True)
def update_bit(zeros, ones, lkt, lw, c0, c1, meta,
               t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
               o_trail, o_nodes, root, ctx, ctx_len, bit, path):
    _walk_create(zeros, ones, lkt, lw, c0, c1, meta,
                 t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                 o_trail, o_nodes, root, ctx, ctx_len, path)
    _apply_bit(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, bit)


@njit(cache=True, nogil=True)
def _hypothetical_root_lw(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, bit):
    """Root weighted log-prob after a virtual update with ``bit``.

    ``path`` entries may be -1 (absent subtree = fresh virtual node).
    """
    # leaf
    nd = path[ctx_len]
    if nd >= 0:
        cur = lkt[nd] + _kt_log_p(zeros, ones, nd, bit)
    else:
        cur = LOG_HALF  # fresh KT, first bit
    for j in range(ctx_len - 1, -1, -1):
        nd = path[j]
        b = ctx[j]
        if nd >= 0:
            own = lkt[nd] + _kt_log_p(zeros, ones, nd, bit)
            ch0 = c0[nd]
            ch1 = c1[nd]
            l0 = lw[ch0] if ch0 >= 0 else 0.0
            l1 = lw[ch1] if ch1 >= 0 else 0.0
        else:
            own = LOG_HALF
            l0 = 0.0
            l1 = 0.0
        loff = l1 if b == 0 else l0
        cur = _lse(LOG_HALF + own, LOG_HALF + cur + loff)
    return cur


@njit(cache=True, nogil=True)
def predict_bit(zeros, ones, lkt, lw, c0, c1, root, ctx, ctx_len, path):
    """(P(0), P(1)) for the next bit in context, no mutation."""
    path[0] = root
    for j in range(ctx_len):
        nd = path[j]
        if nd >= 0:
            path[j + 1] = _child(c0, c1, nd, ctx[j])
        else:
            path[j + 1] = -1
    base = lw[root]
    l0 = _hypothetical_root_lw(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, 0)
    l1 = _hypothetical_root_lw(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, 1)
    return math.exp(l0 - base), math.exp(l1 - base)


@njit(cache=True, nogil=True)
def sample_update_bit(zeros, ones, lkt, lw, c0, c1, meta,
                      t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                      o_trail, o_nodes, root, ctx, ctx_len, u, path):
    """Draw the next bit from the tree's predictive law, then update."""
    _walk_create(zeros, ones, lkt, lw, c0, c1, meta,
                 t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                 o_trail, o_nodes, root, ctx, ctx_len, path)
    base = lw[root]
    l1 = _hypothetical_root_lw(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, 1)
    p1 = math.exp(l1 - base)
    bit = 1 if u < p1 else 0
    _apply_bit(zeros, ones, lkt, lw, c0, c1, ctx, ctx_len, path, bit)
    return bit


@njit(cache=True, nogil=True)
def revert_ops(zeros, ones, lkt, lw, c0, c1, meta,
               t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
               o_trail, o_nodes, k):
    """Undo the last ``k`` recorded bit updates exactly."""
    ops = meta[M_OPLOG]
    for i in range(k):
        op = ops - 1 - i
        ts = o_trail[op]
        tl = meta[M_TRAIL]
        for e in range(tl - 1, ts - 1, -1):
            nd = t_node[e]
            zeros[nd] = t_zeros[e]
            ones[nd] = t_ones[e]
            lkt[nd] = t_lkt[e]
            lw[nd] = t_lw[e]
            c0[nd] = t_c0[e]
            c1[nd] = t_c1[e]
        meta[M_TRAIL] = ts
        meta[M_NNODES] = o_nodes[op]
    meta[M_OPLOG] = ops - k


@njit(cache=True, nogil=True)
def observe_symbol(zeros, ones, lkt, lw, c0, c1, meta,
                   t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                   o_trail, o_nodes, roots, root_off, ctx_buf, ctx_len,
                   sym_bits, k, path):
    """Chain update: tree m sees [ctx, sym_bits[:m]] and symbol bit m."""
    for m in range(k):
        b = sym_bits[m]
        update_bit(zeros, ones, lkt, lw, c0, c1, meta,
                   t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                   o_trail, o_nodes, roots[root_off + m], ctx_buf, ctx_len + m,
                   b, path)
        ctx_buf[ctx_len + m] = b


@njit(cache=True, nogil=True)
def sample_symbol(zeros, ones, lkt, lw, c0, c1, meta,
                  t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                  o_trail, o_nodes, roots, root_off, ctx_buf, ctx_len,
                  k, us, out_bits, path):
    """Chain sample with updates; returns the packed symbol (MSB first)."""
    sym = 0
    for m in range(k):
        bit = sample_update_bit(zeros, ones, lkt, lw, c0, c1, meta,
                                t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                                o_trail, o_nodes, roots[root_off + m], ctx_buf,
                                ctx_len + m, us[m], path)
        ctx_buf[ctx_len + m] = bit
        out_bits[m] = bit
        sym = (sym << 1) | bit
    return sym


@njit(cache=True, nogil=True)
def sample_transition(zeros, ones, lkt, lw, c0, c1, meta,
                      t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                      o_trail, o_nodes, roots, d, aw, rw,
                      s_packed, a, ws, us, path):
    """One fused model step: sample next-state bits then reward bits.

    Workspace layout: ws[0:d] = state bits, ws[d:d+aw] = action bits,
    ws[d+aw:2d+aw] = sampled next-state bits (which is exactly the reward
    chain's conditioning prefix), reward bits appended after.  Returns
    (packed next state, reward symbol).
    """
    for j in range(d):
        ws[j] = (s_packed >> (d - 1 - j)) & 1
    for j in range(aw):
        ws[d + j] = (a >> (aw - 1 - j)) & 1
    s_ctx = d + aw
    s2 = 0
    for m in range(d):
        bit = sample_update_bit(zeros, ones, lkt, lw, c0, c1, meta,
                                t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                                o_trail, o_nodes, roots[m], ws, s_ctx + m,
                                us[m], path)
        ws[s_ctx + m] = bit
        s2 = (s2 << 1) | bit
    r_ctx = 2 * d + aw
    r = 0
    for m in range(rw):
        bit = sample_update_bit(zeros, ones, lkt, lw, c0, c1, meta,
                                t_node, t_zeros, t_ones, t_lkt, t_lw, t_c0, t_c1,
                                o_trail, o_nodes, roots[d + m], ws, r_ctx + m,
                                us[d + m], path)
        ws[r_ctx + m] = bit
        r = (r << 1) | bit
    return s2, r


@njit(cache=True, nogil=True)
def predict_symbol_dist(zeros, ones, lkt, lw, c0, c1,
                        roots, root_off, ctx_buf, ctx_len, k, path, cond, out):
    """Joint distribution over all 2**k symbol patterns via the chain rule.

    Builds per-prefix conditionals (2**k - 1 tree lookups) and composes
    them, so the output sums to exactly 1 up to float rounding.
    """
    for m in range(k):
        nb = 1 << m
        for q in range(nb):
            for j in range(m):
                ctx_buf[ctx_len + j] = (q >> (m - 1 - j)) & 1
            p0, p1 = predict_bit(zeros, ones, lkt, lw, c0, c1,
                                 roots[root_off + m], ctx_buf, ctx_len + m, path)
            cond[nb - 1 + q] = p1
    nsym = 1 << k
    for s in range(nsym):
        p = 1.0
        for m in range(k):
            prefix = s >> (k - m)
            bit = (s >> (k - 1 - m)) & 1
            c1m = cond[(1 << m) - 1 + prefix]
            p *= c1m if bit == 1 else (1.0 - c1m)
        out[s] = p
