"""Discrete factor graphs: variables, table factors and semantic aggregates.

A world is stored as a vector of *domain indices* (0..s-1 per variable);
value labels such as -1/1 only appear at the edges (file formats, builders).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInput

SEMANTICS = ("linear", "logical", "ratio")
SEMANTICS_CODE = {name: i for i, name in enumerate(SEMANTICS)}


def semantic_g(semantics: str, x):
    """Apply the aggregation function of a semantics to a scalar or array."""
    if semantics == "linear":
        return x
    if semantics == "logical":
        return np.sign(x)
    if semantics == "ratio":
        return np.sign(x) * np.log1p(np.abs(x))
    raise InvalidInput(f"unknown semantics {semantics!r}")


@dataclass(frozen=True)
class VariableSpec:
    id: int
    name: str
    domain: tuple[int, ...]

    def __post_init__(self):
        if len(self.domain) < 2:
            raise InvalidInput(f"variable {self.name!r} needs at least two values")
        if len(set(self.domain)) != len(self.domain):
            raise InvalidInput(f"variable {self.name!r} has repeated value labels")

    @property
    def domain_size(self) -> int:
        return len(self.domain)

    def index_of(self, label: int) -> int:
        try:
            return self.domain.index(label)
        except ValueError:
            raise InvalidInput(f"{label} is not a value of {self.name!r}") from None


class TableFactor:
    """Dense factor over ``scope``; ``table`` is row-major over the scope's domains.

    The factor weight is folded into the table values.
    """

    __slots__ = ("scope", "table", "name")

    def __init__(self, scope: Sequence[int], table, name: str | None = None):
        scope = tuple(int(v) for v in scope)
        if len(set(scope)) != len(scope):
            raise InvalidInput(f"factor {name!r} repeats a variable in its scope")
        values = np.array(table, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise InvalidInput(f"factor {name!r} has non-finite table entries")
        values.setflags(write=False)
        self.scope = scope
        self.table = values
        self.name = name

    def __repr__(self):
        return f"TableFactor(scope={self.scope}, name={self.name!r})"


class AggregateFactor:
    """``weight * g(sum of term values)`` with g fixed by ``semantics``."""

    __slots__ = ("weight", "semantics", "terms", "name", "scope")

    def __init__(self, weight: float, semantics: str, terms: Sequence[TableFactor],
                 name: str | None = None):
        if semantics not in SEMANTICS:
            raise InvalidInput(f"unknown semantics {semantics!r}")
        if not np.isfinite(weight):
            raise InvalidInput(f"aggregate {name!r} has a non-finite weight")
        self.weight = float(weight)
        self.semantics = semantics
        self.terms = tuple(terms)
        self.name = name
        seen: dict[int, None] = {}
        for term in self.terms:
            for v in term.scope:
                seen.setdefault(v)
        self.scope = tuple(seen)

    def __repr__(self):
        return (f"AggregateFactor({self.semantics}, weight={self.weight}, "
                f"terms={len(self.terms)}, name={self.name!r})")


Factor = TableFactor | AggregateFactor


class FactorGraph:
    """Immutable factor graph ``<V, Phi>`` with optional clamped evidence.

    ``evidence`` maps variable ids to domain *indices*; clamped variables are
    never resampled and exact computations condition on them.
    """

    def __init__(self, variables: Sequence[VariableSpec], factors: Sequence[Factor],
                 evidence: Mapping[int, int] | None = None):
        self.variables = tuple(variables)
        for i, var in enumerate(self.variables):
            if var.id != i:
                raise InvalidInput(f"variable ids must be 0..n-1 in order, got {var.id} at {i}")
        self.factors = tuple(factors)
        self.domain_sizes = tuple(v.domain_size for v in self.variables)
        n = len(self.variables)
        adjacency: list[list[int]] = [[] for _ in range(n)]
        for fi, factor in enumerate(self.factors):
            if not factor.scope:
                raise InvalidInput(f"factor {fi} ({factor.name!r}) has an empty scope")
            terms = factor.terms if isinstance(factor, AggregateFactor) else (factor,)
            for term in terms:
                for v in term.scope:
                    if not 0 <= v < n:
                        raise InvalidInput(f"factor {fi} references unknown variable {v}")
                expected = int(np.prod([self.domain_sizes[v] for v in term.scope], dtype=np.int64))
                if term.table.size != expected:
                    raise InvalidInput(
                        f"factor {fi} ({factor.name!r}): table has {term.table.size} "
                        f"entries, scope needs {expected}")
            for v in factor.scope:
                adjacency[v].append(fi)
        self.var_to_factors = tuple(tuple(a) for a in adjacency)
        ev = {}
        for v, idx in (evidence or {}).items():
            v, idx = int(v), int(idx)
            if not 0 <= v < n or not 0 <= idx < self.domain_sizes[v]:
                raise InvalidInput(f"evidence {v}={idx} is out of range")
            ev[v] = idx
        self.evidence = ev

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def free_variables(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.n) if v not in self.evidence)

    @property
    def num_worlds(self) -> int:
        return int(np.prod(self.domain_sizes, dtype=object)) if self.variables else 1

    def shape_of(self, factor: TableFactor) -> tuple[int, ...]:
        return tuple(self.domain_sizes[v] for v in factor.scope)

    def table_array(self, factor: TableFactor) -> np.ndarray:
        return factor.table.reshape(self.shape_of(factor))

    def variable_named(self, name: str) -> int:
        for var in self.variables:
            if var.name == name:
                return var.id
        raise InvalidInput(f"no variable named {name!r}")

    def factor_name(self, index: int) -> str:
        name = self.factors[index].name
        return name if name else f"f{index}"

    # -- evaluation ---------------------------------------------------------
    def _table_value(self, factor: TableFactor, world) -> float:
        if not factor.scope:
            return float(factor.table[0])
        return float(self.table_array(factor)[tuple(world[v] for v in factor.scope)])

    def factor_value(self, index: int, world) -> float:
        factor = self.factors[index]
        if isinstance(factor, TableFactor):
            return self._table_value(factor, world)
        inner = sum(self._table_value(t, world) for t in factor.terms)
        return factor.weight * float(semantic_g(factor.semantics, inner))

    # -- derived graphs -----------------------------------------------------
    def with_factors(self, factors: Sequence[Factor]) -> "FactorGraph":
        return FactorGraph(self.variables, factors, self.evidence)

    def without_factor(self, index: int) -> "FactorGraph":
        return self.with_factors(self.factors[:index] + self.factors[index + 1:])

    def with_evidence(self, evidence: Mapping[int, int]) -> "FactorGraph":
        return FactorGraph(self.variables, self.factors, evidence)

    def connected_components(self) -> list[list[int]]:
        """Variable-id components; isolated variables are singleton components."""
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for factor in self.factors:
            scope = factor.scope
            for v in scope[1:]:
                ra, rb = find(scope[0]), find(v)
                if ra != rb:
                    parent[rb] = ra
        groups: dict[int, list[int]] = {}
        for v in range(self.n):
            groups.setdefault(find(v), []).append(v)
        return sorted(groups.values(), key=lambda g: g[0])

    def subgraph(self, var_ids: Iterable[int]) -> "FactorGraph":
        """Induced graph on ``var_ids`` keeping factors whose scope lies inside it."""
        keep = sorted(set(var_ids))
        remap = {old: new for new, old in enumerate(keep)}
        variables = [VariableSpec(remap[v], self.variables[v].name, self.variables[v].domain)
                     for v in keep]
        factors = []
        for factor in self.factors:
            if not set(factor.scope) <= remap.keys():
                continue
            factors.append(_remap_factor(factor, remap))
        evidence = {remap[v]: x for v, x in self.evidence.items() if v in remap}
        return FactorGraph(variables, factors, evidence)

    def condition(self) -> tuple["FactorGraph", tuple[int, ...]]:
        """Substitute the evidence into the factors.

        Returns the graph over the free variables and the tuple mapping new
        variable ids back to old ones. Table factors whose whole scope is
        clamped become constants and are dropped (they do not change any
        distribution); aggregate terms keep their constant contribution.
        """
        if not self.evidence:
            return self, tuple(range(self.n))
        free = self.free_variables
        remap = {old: new for new, old in enumerate(free)}
        variables = [VariableSpec(remap[v], self.variables[v].name, self.variables[v].domain)
                     for v in free]
        factors: list[Factor] = []
        for factor in self.factors:
            if isinstance(factor, TableFactor):
                reduced = self._reduce_table(factor, remap)
                if reduced.scope:
                    factors.append(reduced)
            else:
                terms = [self._reduce_table(t, remap) for t in factor.terms]
                if any(t.scope for t in terms):
                    factors.append(AggregateFactor(factor.weight, factor.semantics, terms,
                                                   factor.name))
        return FactorGraph(variables, factors), free

    def _reduce_table(self, factor: TableFactor, remap: Mapping[int, int]) -> TableFactor:
        arr = factor.table.reshape(self.shape_of(factor)) if factor.scope else factor.table
        index = tuple(self.evidence[v] if v in self.evidence else slice(None)
                      for v in factor.scope)
        reduced = arr[index] if factor.scope else arr
        scope = [remap[v] for v in factor.scope if v not in self.evidence]
        return TableFactor(scope, reduced, factor.name)

    def __repr__(self):
        return f"FactorGraph(n={self.n}, factors={len(self.factors)}, evidence={len(self.evidence)})"


def _remap_factor(factor: Factor, remap: Mapping[int, int]) -> Factor:
    if isinstance(factor, TableFactor):
        return TableFactor([remap[v] for v in factor.scope], factor.table, factor.name)
    terms = [TableFactor([remap[v] for v in t.scope], t.table, t.name) for t in factor.terms]
    return AggregateFactor(factor.weight, factor.semantics, terms, factor.name)


def as_world(graph: FactorGraph, world) -> np.ndarray:
    """Validate and copy a world (vector of domain indices)."""
    arr = np.asarray(world)
    if arr.ndim != 1 or arr.shape[0] != graph.n:
        raise InvalidInput(f"world has shape {arr.shape}, graph has {graph.n} variables")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise InvalidInput("world entries must be integer domain indices")
    arr = arr.astype(np.int64)
    sizes = np.asarray(graph.domain_sizes, dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= sizes):
        raise InvalidInput("world entry outside its variable's domain")
    return arr


def world_from_labels(graph: FactorGraph, labels: Sequence[int]) -> np.ndarray:
    if len(labels) != graph.n:
        raise InvalidInput(f"expected {graph.n} labels, got {len(labels)}")
    return np.array([var.index_of(x) for var, x in zip(graph.variables, labels)],
                    dtype=np.int64)


def world_index(graph: FactorGraph, world) -> int:
    """Row-major index of a world (variable 0 varies slowest)."""
    if graph.n == 0:
        return 0
    return int(np.ravel_multi_index(tuple(np.asarray(world)), graph.domain_sizes))


def world_at(graph: FactorGraph, index: int) -> np.ndarray:
    if graph.n == 0:
        return np.zeros(0, dtype=np.int64)
    return np.array(np.unravel_index(index, graph.domain_sizes), dtype=np.int64)
