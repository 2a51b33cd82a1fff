"""Hierarchy width and friends.

Factor subsets are encoded as Python int bitmasks over factor indices; two
factors are adjacent when their scopes share a variable, so the recursion
runs on the line graph without ever materializing it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx

from .errors import InvalidInput, ResourceLimit
from .graph import FactorGraph
from .hypergraph import gyo_reduction, hypergraph_view

MAX_FACTORS = 64
MAX_MEMO = 2_000_000


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class _LineGraph:
    def __init__(self, graph: FactorGraph):
        self.m = len(graph.factors)
        scopes = [frozenset(f.scope) for f in graph.factors]
        self.var_masks = []  # per variable: factors touching it
        for v in range(graph.n):
            mask = 0
            for fi in graph.var_to_factors[v]:
                mask |= 1 << fi
            if mask:
                self.var_masks.append(mask)
        self.adj = [0] * self.m
        for i, j in combinations(range(self.m), 2):
            if scopes[i] & scopes[j]:
                self.adj[i] |= 1 << j
                self.adj[j] |= 1 << i
        self.full = (1 << self.m) - 1

    def components(self, mask: int) -> list[int]:
        comps = []
        rest = mask
        while rest:
            seed = rest & -rest
            comp = seed
            frontier = seed
            while frontier:
                low = frontier & -frontier
                frontier ^= low
                new = self.adj[low.bit_length() - 1] & rest & ~comp
                comp |= new
                frontier |= new
            comps.append(comp)
            rest &= ~comp
        return comps

    def degree_bound(self, mask: int) -> int:
        return max(((vm & mask).bit_count() for vm in self.var_masks), default=0)

    def _far(self, start: int, mask: int) -> tuple[int, int]:
        """BFS inside ``mask``: (eccentricity of start, a farthest vertex bit)."""
        seen, layer, ecc = start, start, 0
        while True:
            nxt = 0
            for f in _bits(layer):
                nxt |= self.adj[f]
            nxt &= mask & ~seen
            if not nxt:
                return ecc, layer & -layer
            seen |= nxt
            layer = nxt
            ecc += 1

    def path_bound(self, mask: int) -> int:
        """Tree-depth lower bound from a shortest path found by a double BFS sweep.

        A shortest path with e edges is a subgraph of tree-depth
        ceil(log2(e + 2)), and tree-depth is monotone under subgraphs.
        """
        if not mask:
            return 0
        _, far = self._far(mask & -mask, mask)
        ecc, _ = self._far(far, mask)
        return (ecc + 1).bit_length()


class _WidthSolver:
    """Decides ``hw(C) <= k`` for connected factor sets C with shared memo.

    ``memo[C] = (lo, hi)`` brackets the exact width of C. With ``prune``
    off, the degree, path and size bounds are not used and only the recursion of
    the decision procedure runs (the memo still records outcomes).
    """

    def __init__(self, lg: _LineGraph, prune: bool = True, max_memo: int = MAX_MEMO):
        self.lg = lg
        self.prune = prune
        self.max_memo = max_memo
        self.memo: dict[int, list[int]] = {}

    def _entry(self, comp: int) -> list[int]:
        entry = self.memo.get(comp)
        if entry is None:
            if len(self.memo) >= self.max_memo:
                raise ResourceLimit("hierarchy-width memo exceeded its budget")
            size = comp.bit_count()
            if self.prune:
                entry = [max(1, self.lg.degree_bound(comp), self.lg.path_bound(comp)), size]
            else:
                entry = [1, size if size <= 1 else 10 ** 9]
            self.memo[comp] = entry
        return entry

    def at_most(self, comp: int, k: int) -> bool:
        if comp == 0:
            return True
        if k <= 0:
            return False
        entry = self._entry(comp)
        if k >= entry[1]:
            return True
        if k < entry[0]:
            return False
        for f in _bits(comp):
            rest = comp & ~(1 << f)
            parts = sorted(self.lg.components(rest), key=int.bit_count, reverse=True)
            if all(self.at_most(p, k - 1) for p in parts):
                entry[1] = k
                return True
        entry[0] = k + 1
        return False

    def exact(self, comp: int) -> int:
        if comp == 0:
            return 0
        k = self._entry(comp)[0]
        while not self.at_most(comp, k):
            k += 1
        return k

    def best_removal(self, comp: int) -> int:
        """A factor whose removal attains the minimum in the connected recursion."""
        target = self.exact(comp) - 1
        for f in _bits(comp):
            rest = comp & ~(1 << f)
            if all(self.at_most(p, target) for p in self.lg.components(rest)):
                return f
        raise AssertionError("no optimal removal found")  # unreachable


def _check_size(graph: FactorGraph, max_factors: int) -> None:
    if len(graph.factors) > max_factors:
        raise ResourceLimit(
            f"{len(graph.factors)} factors exceed the exact-width guard of {max_factors}; "
            "use hw_at_most_k")


def hierarchy_width(graph: FactorGraph, max_factors: int = MAX_FACTORS) -> int:
    """Exact hierarchy width by memoized branch-and-bound over factor removals."""
    _check_size(graph, max_factors)
    lg = _LineGraph(graph)
    solver = _WidthSolver(lg)
    return max((solver.exact(c) for c in lg.components(lg.full)), default=0)


def hw_at_most_k(graph: FactorGraph, k: int, prune: bool = True) -> bool:
    """Decide ``hw(graph) <= k`` (Algorithm HW(G, k), applied per component)."""
    if k < 0:
        raise InvalidInput("k must be nonnegative")
    lg = _LineGraph(graph)
    solver = _WidthSolver(lg, prune=prune)
    return all(solver.at_most(c, k) for c in lg.components(lg.full))


def hierarchy_width_by_search(graph: FactorGraph, upper: int | None = None) -> int:
    """Smallest k with ``hw_at_most_k`` true, found by binary search.

    Works on graphs beyond the exact guard as long as the decision
    procedure stays cheap (e.g. trees, where degree pruning bites).
    """
    lg = _LineGraph(graph)
    solver = _WidthSolver(lg)
    comps = lg.components(lg.full)
    lo = max((lg.degree_bound(c) for c in comps), default=0)
    hi = upper if upper is not None else max((c.bit_count() for c in comps), default=0)
    while lo < hi:
        mid = (lo + hi) // 2
        if all(solver.at_most(c, mid) for c in comps):
            hi = mid
        else:
            lo = mid + 1
    return lo


# -- hierarchy decompositions ------------------------------------------------

@dataclass
class DecompNode:
    id: int
    parent: int | None
    label: frozenset
    children: list[int] = field(default_factory=list)


@dataclass
class HierarchyDecomposition:
    nodes: list[DecompNode]
    root: int = 0

    @property
    def width(self) -> int:
        return max((len(n.label) for n in self.nodes), default=0)

    def add(self, parent: int | None, label) -> int:
        node = DecompNode(len(self.nodes), parent, frozenset(label))
        self.nodes.append(node)
        if parent is not None:
            self.nodes[parent].children.append(node.id)
        return node.id

    def to_text(self, graph: FactorGraph | None = None) -> str:
        def names(label):
            if graph is None:
                return " ".join(f"f{i}" for i in sorted(label))
            return " ".join(graph.factor_name(i) for i in sorted(label))

        lines = []

        def walk(nid, depth):
            node = self.nodes[nid]
            parent = "none" if node.parent is None else str(node.parent)
            lines.append(f"{'  ' * depth}node {nid} parent {parent} : {names(node.label)}".rstrip())
            for c in node.children:
                walk(c, depth + 1)

        if self.nodes:
            walk(self.root, 0)
        return "\n".join(lines) + "\n"


def hierarchy_decomposition(graph: FactorGraph, max_factors: int = MAX_FACTORS) -> HierarchyDecomposition:
    """Certificate of width hw(graph), built along the inductive construction:
    an empty root over components, and for a connected part the optimal
    removed factor added to every label of the remainder's decomposition."""
    _check_size(graph, max_factors)
    lg = _LineGraph(graph)
    solver = _WidthSolver(lg)
    decomp = HierarchyDecomposition([])

    def build(mask: int, parent: int | None, carried: frozenset) -> None:
        comps = lg.components(mask)
        if not comps:
            decomp.add(parent, carried)
            return
        if len(comps) > 1:
            root = decomp.add(parent, carried)
            for c in comps:
                build(c, root, carried)
            return
        f = solver.best_removal(mask)
        build(mask & ~(1 << f), parent, carried | {f})

    build(lg.full, None, frozenset())
    return decomp


@dataclass
class Violation:
    condition: int   # 0 = malformed tree, 1..4 = decomposition conditions
    witness: tuple
    message: str


def validate_decomposition(graph: FactorGraph, decomp: HierarchyDecomposition) -> Violation | None:
    """Check the four decomposition conditions; return the first violation or None."""
    nodes = decomp.nodes
    m = len(graph.factors)
    if not nodes:
        return Violation(0, (), "decomposition has no nodes")
    roots = [n.id for n in nodes if n.parent is None]
    if roots != [decomp.root]:
        return Violation(0, tuple(roots), "tree must have exactly one root")
    seen = set()
    stack = [decomp.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            return Violation(0, (nid,), "node reached twice")
        seen.add(nid)
        for c in nodes[nid].children:
            if nodes[c].parent != nid:
                return Violation(0, (nid, c), "child/parent links disagree")
            stack.append(c)
    if len(seen) != len(nodes):
        return Violation(0, tuple(sorted(set(range(len(nodes))) - seen)), "unreachable nodes")
    for n in nodes:
        if any(not 0 <= e < m for e in n.label):
            return Violation(0, (n.id,), "label references an unknown factor")

    holders = {e: [n.id for n in nodes if e in n.label] for e in range(m)}
    for e in range(m):
        if not holders[e]:
            return Violation(1, (e,), f"factor {graph.factor_name(e)} appears in no label")
    for e in range(m):
        # connected iff exactly one holder has a parent that does not hold e
        tops = [nid for nid in holders[e]
                if nodes[nid].parent is None or e not in nodes[nodes[nid].parent].label]
        if len(tops) != 1:
            return Violation(2, (e, tuple(tops)),
                             f"nodes holding {graph.factor_name(e)} are not connected")
    scopes = [frozenset(f.scope) for f in graph.factors]
    for e, f in combinations(range(m), 2):
        if scopes[e] & scopes[f] and not any(e in n.label and f in n.label for n in nodes):
            return Violation(3, (e, f), f"intersecting factors {graph.factor_name(e)}, "
                                        f"{graph.factor_name(f)} never share a label")
    for n in nodes:
        if n.parent is not None and not nodes[n.parent].label <= n.label:
            return Violation(4, (n.parent, n.id), f"label of node {n.parent} is not a "
                                                   f"subset of its child {n.id}")
    return None


# -- tree-depth of the line graph ------------------------------------------

def line_graph(graph: FactorGraph) -> nx.Graph:
    lg = nx.Graph()
    lg.add_nodes_from(range(len(graph.factors)))
    scopes = [set(f.scope) for f in graph.factors]
    for i, j in combinations(range(len(scopes)), 2):
        if scopes[i] & scopes[j]:
            lg.add_edge(i, j)
    return lg


def tree_depth(g: nx.Graph, max_vertices: int = 24) -> int:
    """Exact tree-depth by recursive vertex deletion, memoized on vertex sets."""
    if g.number_of_nodes() > max_vertices:
        raise ResourceLimit(f"tree-depth is limited to {max_vertices} vertices")
    memo: dict[frozenset, int] = {}

    def td(vs: frozenset) -> int:
        if not vs:
            return 0
        if vs in memo:
            return memo[vs]
        sub = g.subgraph(vs)
        comps = [frozenset(c) for c in nx.connected_components(sub)]
        if len(comps) > 1:
            val = max(td(c) for c in comps)
        else:
            val = 1 + min(td(vs - {v}) for v in vs)
        memo[vs] = val
        return val

    return td(frozenset(g.nodes))


def tree_depth_of_line_graph(graph: FactorGraph, max_vertices: int = 24) -> int:
    return tree_depth(line_graph(graph), max_vertices)


# -- structural bounds and reports --------------------------------------------

@dataclass(frozen=True)
class StructuralBounds:
    degree_lower_bound: int
    acyclic: bool

    @property
    def hypertree_width_if_acyclic(self) -> int | None:
        return 1 if self.acyclic else None


def structural_bounds(graph: FactorGraph) -> StructuralBounds:
    degree = max((len(a) for a in graph.var_to_factors), default=0)
    acyclic = gyo_reduction(hypergraph_view(graph).hyperedges).acyclic
    return StructuralBounds(degree, acyclic)


@dataclass
class WidthReport:
    hierarchy_width: int
    degree_lower_bound: int
    acyclic: bool
    certificate: HierarchyDecomposition

    def to_text(self, graph: FactorGraph | None = None) -> str:
        return (f"hierarchy_width {self.hierarchy_width}\n"
                f"degree_lower_bound {self.degree_lower_bound}\n"
                f"acyclic {str(self.acyclic).lower()}\n"
                f"certificate_width {self.certificate.width}\n")


def width_report(graph: FactorGraph, max_factors: int = MAX_FACTORS) -> WidthReport:
    bounds = structural_bounds(graph)
    cert = hierarchy_decomposition(graph, max_factors)
    return WidthReport(cert.width, bounds.degree_lower_bound, bounds.acyclic, cert)
