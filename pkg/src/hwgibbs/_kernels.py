"""Compiled random-scan Gibbs kernels.

A graph is flattened into a tuple of arrays (see ``compile_graph``). Each
step consumes two uniforms: the first picks the free variable
``free[floor(u0 * len(free))]``, the second drives an inverse-CDF draw of
its new value. The Python reference path in ``sampler`` uses the same rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import SEMANTICS_CODE, AggregateFactor, FactorGraph, TableFactor


@dataclass
class CompiledGraph:
    arrays: tuple
    free: np.ndarray
    n: int
    max_dom: int
    max_adj_agg: int
    n_agg: int


def _strides(sizes):
    strides = np.ones(len(sizes), dtype=np.int64)
    for i in range(len(sizes) - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]
    return strides


def _pack_tables(graph: FactorGraph, tables):
    scope_ptr = [0]
    scope, stride, table_ptr, table = [], [], [0], []
    for t in tables:
        sizes = [graph.domain_sizes[v] for v in t.scope]
        scope.extend(t.scope)
        stride.extend(_strides(sizes).tolist())
        scope_ptr.append(len(scope))
        table.extend(t.table.tolist())
        table_ptr.append(len(table))
    return (np.array(scope_ptr, dtype=np.int64), np.array(scope, dtype=np.int64),
            np.array(stride, dtype=np.int64), np.array(table_ptr, dtype=np.int64),
            np.array(table, dtype=np.float64))


def compile_graph(graph: FactorGraph) -> CompiledGraph:
    n = graph.n
    dom = np.array(graph.domain_sizes, dtype=np.int64)
    tfs = [f for f in graph.factors if isinstance(f, TableFactor)]
    aggs = [f for f in graph.factors if isinstance(f, AggregateFactor)]
    tf_pack = _pack_tables(graph, tfs)
    terms = [t for a in aggs for t in a.terms]
    tm_pack = _pack_tables(graph, terms)
    ag_w = np.array([a.weight for a in aggs], dtype=np.float64)
    ag_sem = np.array([SEMANTICS_CODE[a.semantics] for a in aggs], dtype=np.int64)
    ag_tp = np.zeros(len(aggs) + 1, dtype=np.int64)
    for i, a in enumerate(aggs):
        ag_tp[i + 1] = ag_tp[i] + len(a.terms)

    v_tf = [[] for _ in range(n)]
    for i, f in enumerate(tfs):
        for v in f.scope:
            v_tf[v].append(i)
    # per variable: adjacent aggregates, and for each the terms touching v
    v_ag = [[] for _ in range(n)]
    v_agt = [[] for _ in range(n)]
    for a_idx, a in enumerate(aggs):
        touching: dict[int, list[int]] = {}
        for j, t in enumerate(a.terms):
            for v in t.scope:
                touching.setdefault(v, []).append(int(ag_tp[a_idx]) + j)
        for v, ts in touching.items():
            v_ag[v].append(a_idx)
            v_agt[v].append(ts)

    def csr(lists):
        ptr = np.zeros(len(lists) + 1, dtype=np.int64)
        for i, l in enumerate(lists):
            ptr[i + 1] = ptr[i] + len(l)
        flat = np.array([x for l in lists for x in l], dtype=np.int64)
        return ptr, flat

    v_tf_p, v_tf_f = csr(v_tf)
    v_ag_p, v_ag_f = csr(v_ag)
    entries = [ts for lst in v_agt for ts in lst]
    v_agt_p, v_agt_f = csr(entries)
    arrays = (dom,) + tf_pack + (ag_w, ag_sem, ag_tp) + tm_pack + (
        v_tf_p, v_tf_f, v_ag_p, v_ag_f, v_agt_p, v_agt_f)
    free = np.array(graph.free_variables, dtype=np.int64)
    max_adj = max((len(l) for l in v_ag), default=0)
    return CompiledGraph(arrays, free, n, int(dom.max()) if n else 1, max(max_adj, 1), len(aggs))


@njit(cache=True)
def _g(sem, s):
    if sem == 0:
        return s
    if s > 0.0:
        sg = 1.0
    elif s < 0.0:
        sg = -1.0
    else:
        sg = 0.0
    if sem == 1:
        return sg
    return sg * math.log1p(abs(s))


@njit(cache=True)
def _tval(sp, sc, st, tp, tb, f, world):
    idx = 0
    for i in range(sp[f], sp[f + 1]):
        idx += world[sc[i]] * st[i]
    return tb[tp[f] + idx]


@njit(cache=True)
def agg_sums(G, world, out):
    (dom, tf_sp, tf_sc, tf_st, tf_tp, tf_tb, ag_w, ag_sem, ag_tp,
     tm_sp, tm_sc, tm_st, tm_tp, tm_tb, v_tf_p, v_tf, v_ag_p, v_ag, v_agt_p, v_agt) = G
    for a in range(ag_w.shape[0]):
        s = 0.0
        for t in range(ag_tp[a], ag_tp[a + 1]):
            s += _tval(tm_sp, tm_sc, tm_st, tm_tp, tm_tb, t, world)
        out[a] = s


@njit(cache=True)
def _logits(G, world, agsum, v, logits, base):
    """Unnormalized log-conditional of v into logits[:dom[v]]; fills base."""
    (dom, tf_sp, tf_sc, tf_st, tf_tp, tf_tb, ag_w, ag_sem, ag_tp,
     tm_sp, tm_sc, tm_st, tm_tp, tm_tb, v_tf_p, v_tf, v_ag_p, v_ag, v_agt_p, v_agt) = G
    cur = world[v]
    for j in range(v_ag_p[v], v_ag_p[v + 1]):
        a = v_ag[j]
        b = agsum[a]
        for q in range(v_agt_p[j], v_agt_p[j + 1]):
            b -= _tval(tm_sp, tm_sc, tm_st, tm_tp, tm_tb, v_agt[q], world)
        base[j - v_ag_p[v]] = b
    k = dom[v]
    for x in range(k):
        world[v] = x
        e = 0.0
        for j in range(v_tf_p[v], v_tf_p[v + 1]):
            e += _tval(tf_sp, tf_sc, tf_st, tf_tp, tf_tb, v_tf[j], world)
        for j in range(v_ag_p[v], v_ag_p[v + 1]):
            a = v_ag[j]
            s = base[j - v_ag_p[v]]
            for q in range(v_agt_p[j], v_agt_p[j + 1]):
                s += _tval(tm_sp, tm_sc, tm_st, tm_tp, tm_tb, v_agt[q], world)
            e += ag_w[a] * _g(ag_sem[a], s)
        logits[x] = e
    world[v] = cur


@njit(cache=True)
def _normalize(logits, k, probs):
    m = logits[0]
    for x in range(1, k):
        if logits[x] > m:
            m = logits[x]
    total = 0.0
    for x in range(k):
        probs[x] = math.exp(logits[x] - m)
        total += probs[x]
    for x in range(k):
        probs[x] /= total


@njit(cache=True)
def _inverse_cdf(probs, k, u):
    acc = 0.0
    for x in range(k - 1):
        acc += probs[x]
        if u < acc:
            return x
    return k - 1


@njit(cache=True)
def _set_value(G, world, agsum, v, x, base):
    (dom, tf_sp, tf_sc, tf_st, tf_tp, tf_tb, ag_w, ag_sem, ag_tp,
     tm_sp, tm_sc, tm_st, tm_tp, tm_tb, v_tf_p, v_tf, v_ag_p, v_ag, v_agt_p, v_agt) = G
    world[v] = x
    for j in range(v_ag_p[v], v_ag_p[v + 1]):
        s = base[j - v_ag_p[v]]
        for q in range(v_agt_p[j], v_agt_p[j + 1]):
            s += _tval(tm_sp, tm_sc, tm_st, tm_tp, tm_tb, v_agt[q], world)
        agsum[v_ag[j]] = s


@njit(cache=True)
def run_block(G, free, world, agsum, uniforms, counts, track, hist, hist_strides, hidx,
              record):
    """Advance one chain through ``uniforms.shape[0]`` steps.

    When ``record`` is true, after every step the value of each tracked
    variable is counted, and the world histogram (if non-empty) is bumped.
    Returns the updated row-major world index.
    """
    dom = G[0]
    maxk = 1
    for i in range(dom.shape[0]):
        if dom[i] > maxk:
            maxk = dom[i]
    logits = np.empty(maxk)
    probs = np.empty(maxk)
    base = np.empty(max(1, G[17].shape[0]))
    nfree = free.shape[0]
    use_hist = hist.shape[0] > 0
    for step in range(uniforms.shape[0]):
        if nfree > 0:
            v = free[int(uniforms[step, 0] * nfree)]
            k = dom[v]
            _logits(G, world, agsum, v, logits, base)
            _normalize(logits, k, probs)
            x = _inverse_cdf(probs, k, uniforms[step, 1])
            old = world[v]
            _set_value(G, world, agsum, v, x, base)
            if use_hist:
                hidx += (x - old) * hist_strides[v]
        if record:
            for i in range(track.shape[0]):
                t = track[i]
                counts[i, world[t]] += 1
            if use_hist:
                hist[hidx] += 1
    return hidx


@njit(cache=True)
def coupled_block(G, free, wa, wb, sa, sb, uniforms, diff):
    """Correlated-flip coupling: shared variable choice, maximal coupling of
    the two conditionals. Returns the 1-based step at which the chains first
    agree (0 if they already agree, -1 if not within the block)."""
    dom = G[0]
    maxk = 1
    for i in range(dom.shape[0]):
        if dom[i] > maxk:
            maxk = dom[i]
    la = np.empty(maxk)
    lb = np.empty(maxk)
    pa = np.empty(maxk)
    pb = np.empty(maxk)
    mn = np.empty(maxk)
    ra = np.empty(maxk)
    rb = np.empty(maxk)
    nb = max(1, G[17].shape[0])
    basea = np.empty(nb)
    baseb = np.empty(nb)
    nfree = free.shape[0]
    ndiff = 0
    for i in range(wa.shape[0]):
        if wa[i] != wb[i]:
            ndiff += 1
    if ndiff == 0:
        return 0
    for step in range(uniforms.shape[0]):
        u0 = uniforms[step, 0]
        u1 = uniforms[step, 1]
        v = free[int(u0 * nfree)]
        k = dom[v]
        _logits(G, wa, sa, v, la, basea)
        _normalize(la, k, pa)
        _logits(G, wb, sb, v, lb, baseb)
        _normalize(lb, k, pb)
        overlap = 0.0
        for x in range(k):
            mn[x] = min(pa[x], pb[x])
            overlap += mn[x]
        if u1 < overlap:
            x = _inverse_cdf(mn, k, u1)
            xa = x
            xb = x
        else:
            r = u1 - overlap
            for x in range(k):
                ra[x] = pa[x] - mn[x]
                rb[x] = pb[x] - mn[x]
            xa = _inverse_cdf(ra, k, r)
            xb = _inverse_cdf(rb, k, r)
        before = 1 if wa[v] != wb[v] else 0
        _set_value(G, wa, sa, v, xa, basea)
        _set_value(G, wb, sb, v, xb, baseb)
        after = 1 if xa != xb else 0
        ndiff += after - before
        diff[step] = ndiff
        if ndiff == 0:
            return step + 1
    return -1
