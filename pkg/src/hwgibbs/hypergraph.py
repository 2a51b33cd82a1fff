"""Hypergraph view of a factor graph and the GYO acyclicity reduction."""
from __future__ import annotations

from dataclasses import dataclass

from .graph import FactorGraph


@dataclass(frozen=True)
class HypergraphView:
    vertices: tuple[int, ...]
    hyperedges: tuple[frozenset, ...]


def hypergraph_view(graph: FactorGraph) -> HypergraphView:
    # isolated variables carry no width and are left out
    edges = tuple(frozenset(f.scope) for f in graph.factors)
    touched = sorted(set().union(*edges)) if edges else []
    return HypergraphView(tuple(touched), edges)


@dataclass
class GYOResult:
    acyclic: bool
    parent: dict[int, int | None]   # join-tree parent of each removed edge
    order: list[int]                # removal order: children before parents


def gyo_reduction(edges) -> GYOResult:
    """Graham/Yu-Ozsoyoglu ear removal.

    Alternately drops vertices that occur in a single remaining edge and
    edges contained in another remaining edge. The hypergraph is acyclic iff
    every edge gets removed; the containment witnesses form a join tree.
    """
    alive = {i: set(e) for i, e in enumerate(edges)}
    parent: dict[int, int | None] = {}
    order: list[int] = []
    changed = True
    while alive and changed:
        changed = False
        counts: dict[int, int] = {}
        for e in alive.values():
            for v in e:
                counts[v] = counts.get(v, 0) + 1
        for e in alive.values():
            lonely = {v for v in e if counts[v] == 1}
            if lonely:
                e -= lonely
                changed = True
        for i in sorted(alive):
            e = alive[i]
            witness = None
            for j in sorted(alive):
                if j != i and e <= alive[j]:
                    witness = j
                    break
            if witness is not None or not e:
                parent[i] = witness
                order.append(i)
                del alive[i]
                changed = True
                break
    return GYOResult(not alive, parent, order)


def is_acyclic(graph: FactorGraph) -> bool:
    return gyo_reduction(hypergraph_view(graph).hyperedges).acyclic
