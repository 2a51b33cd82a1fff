"""Energy, Gibbs conditionals and exact inference oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInput, ResourceLimit, UnsupportedStructure
from .graph import AggregateFactor, FactorGraph, TableFactor, as_world, semantic_g
from .hypergraph import gyo_reduction

DEFAULT_STATE_CAP = 2 ** 20


def energy(graph: FactorGraph, world) -> float:
    """Sum of all factor values at ``world``."""
    world = as_world(graph, world)
    return float(sum(graph.factor_value(i, world) for i in range(len(graph.factors))))


def conditional_distribution(graph: FactorGraph, world, var: int) -> np.ndarray:
    """Distribution of ``var`` given every other coordinate of ``world``.

    Only factors adjacent to ``var`` are evaluated.
    """
    world = as_world(graph, world)
    if not 0 <= var < graph.n:
        raise InvalidInput(f"variable {var} out of range")
    k = graph.domain_sizes[var]
    adjacent = graph.var_to_factors[var]
    logits = np.empty(k)
    w = world.copy()
    for x in range(k):
        w[var] = x
        logits[x] = sum(graph.factor_value(i, w) for i in adjacent)
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


def _broadcast(graph: FactorGraph, scope, arr: np.ndarray) -> np.ndarray:
    """Lay out a factor array (axes in scope order) against the full world grid."""
    if not scope:
        return np.asarray(arr, dtype=float).reshape((1,) * graph.n)
    order = np.argsort(scope)
    arr = np.transpose(arr, order)
    shape = [1] * graph.n
    for v in scope:
        shape[v] = graph.domain_sizes[v]
    return arr.reshape(shape)


def aggregate_inner_sum(graph: FactorGraph, factor: AggregateFactor) -> np.ndarray:
    total = np.zeros((1,) * graph.n)
    for term in factor.terms:
        arr = graph.table_array(term) if term.scope else term.table[0]
        total = total + _broadcast(graph, term.scope, arr)
    return total


def factor_grid(graph: FactorGraph, factor) -> np.ndarray:
    """Values of one factor on the world grid (broadcastable, not materialized)."""
    if isinstance(factor, TableFactor):
        return _broadcast(graph, factor.scope, graph.table_array(factor))
    return factor.weight * semantic_g(factor.semantics, aggregate_inner_sum(graph, factor))


def energy_grid(graph: FactorGraph, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """Energy of every world as an array shaped by the variables' domain sizes."""
    if graph.num_worlds > cap:
        raise ResourceLimit(f"|Omega| = {graph.num_worlds} exceeds the cap {cap}")
    grid = np.zeros(graph.domain_sizes)
    for factor in graph.factors:
        grid = grid + factor_grid(graph, factor)
    return grid


@dataclass
class JointTable:
    probabilities: np.ndarray   # flat, row-major world order
    log_partition: float
    shape: tuple[int, ...]

    def marginals(self) -> list[np.ndarray]:
        grid = self.probabilities.reshape(self.shape)
        out = []
        for axis in range(len(self.shape)):
            others = tuple(a for a in range(len(self.shape)) if a != axis)
            out.append(grid.sum(axis=others))
        return out


def exact_joint(graph: FactorGraph, cap: int = DEFAULT_STATE_CAP) -> JointTable:
    """Enumerate Omega. Clamped worlds inconsistent with evidence get probability 0."""
    grid = energy_grid(graph, cap)
    if graph.evidence:
        mask = np.zeros(graph.domain_sizes, dtype=bool)
        index = tuple(graph.evidence.get(v, slice(None)) for v in range(graph.n))
        mask[index] = True
        grid = np.where(mask, grid, -np.inf)
    flat = grid.ravel()
    log_z = float(logsumexp(flat))
    probs = np.exp(flat - log_z)
    return JointTable(probs, log_z, tuple(graph.domain_sizes))


def _dense_log_potential(graph: FactorGraph, factor, cap: int) -> np.ndarray:
    if isinstance(factor, TableFactor):
        return graph.table_array(factor).copy()
    size = int(np.prod([graph.domain_sizes[v] for v in factor.scope], dtype=np.int64))
    if size > cap:
        raise UnsupportedStructure(
            f"aggregate {factor.name!r} spans {size} joint states; too large to tabulate")
    sub_shape = tuple(graph.domain_sizes[v] for v in factor.scope)
    pos = {v: i for i, v in enumerate(factor.scope)}
    inner = np.zeros(sub_shape)
    for term in factor.terms:
        if not term.scope:
            inner = inner + term.table[0]
            continue
        arr = graph.table_array(term)
        order = np.argsort([pos[v] for v in term.scope])
        arr = np.transpose(arr, order)
        shape = [1] * len(factor.scope)
        for v in term.scope:
            shape[pos[v]] = graph.domain_sizes[v]
        inner = inner + arr.reshape(shape)
    return factor.weight * semantic_g(factor.semantics, inner)


def _align(arr: np.ndarray, arr_vars, target_vars) -> np.ndarray:
    """Broadcast ``arr`` (axes = arr_vars) against the axes ``target_vars``."""
    pos = {v: i for i, v in enumerate(target_vars)}
    if not arr_vars:
        return np.asarray(arr).reshape((1,) * len(target_vars))
    order = np.argsort([pos[v] for v in arr_vars])
    arr = np.transpose(arr, order)
    shape = [1] * len(target_vars)
    sorted_vars = [arr_vars[i] for i in order]
    for axis, v in enumerate(sorted_vars):
        shape[pos[v]] = arr.shape[axis]
    return arr.reshape(shape)


def _sum_out(arr: np.ndarray, arr_vars, keep) -> tuple[np.ndarray, tuple[int, ...]]:
    keep = set(keep)
    axes = tuple(i for i, v in enumerate(arr_vars) if v not in keep)
    kept = tuple(v for v in arr_vars if v in keep)
    if not axes:
        return arr, kept
    return logsumexp(arr, axis=axes), kept


def exact_marginals_acyclic(graph: FactorGraph, cap: int = DEFAULT_STATE_CAP) -> list[np.ndarray]:
    """Exact per-variable marginals by sum-product over a GYO join tree.

    Raises UnsupportedStructure when the hypergraph is cyclic.
    """
    cliques: list[tuple[tuple[int, ...], np.ndarray]] = []
    for factor in graph.factors:
        cliques.append((tuple(factor.scope), _dense_log_potential(graph, factor, cap)))
    for v, x in graph.evidence.items():
        ind = np.full(graph.domain_sizes[v], -np.inf)
        ind[x] = 0.0
        cliques.append(((v,), ind))

    gyo = gyo_reduction([frozenset(s) for s, _ in cliques])
    if not gyo.acyclic:
        raise UnsupportedStructure("factor graph is cyclic; use exact_joint instead")

    children: dict[int, list[int]] = {i: [] for i in range(len(cliques))}
    for i, p in gyo.parent.items():
        if p is not None:
            children[p].append(i)

    up_belief: dict[int, np.ndarray] = {}
    up_msg: dict[int, tuple[np.ndarray, tuple[int, ...]]] = {}
    for i in gyo.order:  # leaves first
        scope, pot = cliques[i]
        belief = pot.copy()
        for c in children[i]:
            msg, mvars = up_msg[c]
            belief = belief + _align(msg, mvars, scope)
        up_belief[i] = belief
        p = gyo.parent[i]
        if p is not None:
            sep = set(scope) & set(cliques[p][0])
            up_msg[i] = _sum_out(belief, scope, sep)

    # down_in[i]: message from the parent side, aligned to clique i's axes
    down_in: dict[int, np.ndarray] = {}
    full: dict[int, np.ndarray] = {}
    for i in reversed(gyo.order):  # roots first
        scope, pot = cliques[i]
        p = gyo.parent[i]
        full[i] = up_belief[i] if p is None else up_belief[i] + down_in[i]
        for c in children[i]:
            rest = pot if p is None else pot + down_in[i]
            for other in children[i]:
                if other != c:
                    msg, mvars = up_msg[other]
                    rest = rest + _align(msg, mvars, scope)
            cscope = cliques[c][0]
            down, dvars = _sum_out(rest, scope, set(scope) & set(cscope))
            down_in[c] = _align(down, dvars, cscope)

    home: dict[int, int] = {}
    for i, (scope, _) in enumerate(cliques):
        for v in scope:
            home.setdefault(v, i)
    out = []
    for v in range(graph.n):
        if v not in home:
            out.append(np.full(graph.domain_sizes[v], 1.0 / graph.domain_sizes[v]))
            continue
        i = home[v]
        marg, _ = _sum_out(full[i], cliques[i][0], {v})
        marg = np.exp(marg - logsumexp(marg))
        out.append(marg / marg.sum())
    return out


def max_factor_weight(graph: FactorGraph) -> float:
    """Largest value range over factors (0 for a factorless graph).

    Aggregates use the per-term extremes, which is exact for linear
    aggregates and an upper bound for the others since g is nondecreasing.
    """
    best = 0.0
    for factor in graph.factors:
        best = max(best, factor_weight_range(factor))
    return best


def factor_weight_range(factor) -> float:
    if isinstance(factor, TableFactor):
        return float(factor.table.max() - factor.table.min())
    hi = sum(float(t.table.max()) for t in factor.terms)
    lo = sum(float(t.table.min()) for t in factor.terms)
    g_hi = float(semantic_g(factor.semantics, hi))
    g_lo = float(semantic_g(factor.semantics, lo))
    return abs(factor.weight) * (g_hi - g_lo)
