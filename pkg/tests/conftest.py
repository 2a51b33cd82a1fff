"""Shared independent oracles for the test suite."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import settings

from hwgibbs.graph import AggregateFactor, FactorGraph
from hwgibbs.templates import Dataset, Schema, TemplateFactor, TemplateVariable, Term

settings.register_profile("repo", derandomize=True, print_blob=True)
settings.load_profile("repo")


def brute_hierarchy_width(scopes) -> int:
    """Hierarchy width straight from the recursive definition, no pruning."""
    scopes = [frozenset(s) for s in scopes]

    def components(idx: frozenset):
        left = set(idx)
        out = []
        while left:
            stack = [left.pop()]
            comp = set(stack)
            while stack:
                i = stack.pop()
                for j in list(left):
                    if scopes[i] & scopes[j]:
                        left.remove(j)
                        comp.add(j)
                        stack.append(j)
            out.append(frozenset(comp))
        return out

    @lru_cache(maxsize=None)
    def hw(idx: frozenset) -> int:
        if not idx:
            return 0
        comps = components(idx)
        if len(comps) > 1:
            return max(hw(c) for c in comps)
        return 1 + min(hw(idx - {f}) for f in idx)

    return hw(frozenset(range(len(scopes))))


def brute_energy(graph: FactorGraph, world) -> float:
    """Energy by direct table lookup, written independently of the package."""
    total = 0.0
    for f in graph.factors:
        if isinstance(f, AggregateFactor):
            s = 0.0
            for t in f.terms:
                shape = [graph.domain_sizes[v] for v in t.scope]
                s += t.table[np.ravel_multi_index([world[v] for v in t.scope], shape)]
            g = {"linear": s, "logical": np.sign(s), "ratio": np.sign(s) * np.log1p(abs(s))}
            total += f.weight * g[f.semantics]
        else:
            shape = [graph.domain_sizes[v] for v in f.scope]
            total += f.table[np.ravel_multi_index([world[v] for v in f.scope], shape)]
    return float(total)


def all_worlds(graph: FactorGraph):
    return [np.array(w) for w in itertools.product(*(range(s) for s in graph.domain_sizes))]


def brute_joint(graph: FactorGraph) -> np.ndarray:
    e = np.array([brute_energy(graph, w) for w in all_worlds(graph)])
    p = np.exp(e - e.max())
    return p / p.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_mixed_graph(rng, max_vars=5, max_factors=4, max_states=3):
    """Small random graph mixing table factors and aggregates of every semantics."""
    from hwgibbs.graph import SEMANTICS, TableFactor, VariableSpec

    n = int(rng.integers(1, max_vars + 1))
    sizes = rng.integers(2, max_states + 1, size=n)
    variables = [VariableSpec(i, f"x{i}", tuple(range(int(sizes[i])))) for i in range(n)]

    def table(scope):
        return TableFactor(scope, rng.uniform(-1, 1, size=int(np.prod([sizes[v] for v in scope]))))

    def scope():
        k = int(rng.integers(1, min(3, n) + 1))
        return tuple(int(v) for v in rng.choice(n, size=k, replace=False))

    factors = []
    for _ in range(int(rng.integers(0, max_factors + 1))):
        if rng.random() < 0.5:
            factors.append(table(scope()))
        else:
            terms = [table(scope()) for _ in range(int(rng.integers(1, 4)))]
            sem = SEMANTICS[int(rng.integers(0, 3))]
            factors.append(AggregateFactor(float(rng.uniform(-1, 1)), sem, terms))
    return FactorGraph(variables, factors)


# -- template generators --------------------------------------------------------

def tf(name, symbols, terms, heads=(), weight=1.0, semantics=None, table=None):
    terms = tuple(Term(v, tuple(a)) for v, a in terms)
    table = table if table is not None else (0.0,) * (2 ** len(terms))
    return TemplateFactor(name, tuple(symbols), tuple(s in heads for s in symbols), weight,
                          terms, tuple(table), semantics)


def random_prefix_schema(rng, n_factors=None):
    """Random hierarchical template whose head symbols lead every term."""
    classes = ("A", "B")
    variables: dict[tuple, list[str]] = {}
    factors = []
    for j in range(n_factors or int(rng.integers(1, 5))):
        n_head = int(rng.integers(0, 3))
        n_body = int(rng.integers(0, 3))
        heads = [f"h{i}" for i in range(n_head)]
        body = [f"b{i}" for i in range(n_body)]
        cls = {s: classes[int(rng.integers(0, 2))] for s in heads + body}
        terms = []
        for _ in range(int(rng.integers(1, 4))):
            extra = [s for s in body if rng.random() < 0.6]
            rng.shuffle(extra)
            terms.append(heads + extra)
        for s in body:
            if not any(s in t for t in terms):
                terms[-1] = terms[-1] + [s]
        named = []
        for args in terms:
            sig = tuple(cls[s] for s in args)
            pool = variables.setdefault(sig, [])
            if not pool or rng.random() < 0.3:
                pool.append(f"V{sum(len(p) for p in variables.values())}")
            named.append((pool[int(rng.integers(0, len(pool)))], args))
        table = tuple(float(x) for x in rng.integers(-2, 3, size=2 ** len(named)))
        sem = "linear" if (not body and rng.random() < 0.3) else None
        factors.append(tf(f"t{j}", heads + body, named, heads, float(rng.uniform(-1, 1)), sem, table))
    tvars = tuple(TemplateVariable(name, sig, (0, 1)) for sig, pool in variables.items() for name in pool)
    return Schema(classes, tvars, tuple(factors))


def random_dataset(rng, max_objects=3):
    return Dataset(objects={c: [f"{c.lower()}{i}" for i in range(int(rng.integers(0, max_objects + 1)))]
                            for c in ("A", "B")})
