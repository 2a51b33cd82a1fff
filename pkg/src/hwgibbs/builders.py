"""Constructors for the model families used in tests and experiments."""
from __future__ import annotations

import numpy as np

from .errors import InvalidInput
from .graph import SEMANTICS, AggregateFactor, FactorGraph, TableFactor, VariableSpec
from .rng import make_rng
from .width import hierarchy_width_by_search


def build_voting_model(n: int, semantics: str, w: float = 0.5,
                       prior_seed: int | None = None) -> FactorGraph:
    """Voting model: query Q in {-1, 1}, voters T_i, F_i in {0, 1}.

    Variable order is Q, T_1..T_n, F_1..F_n. Prior weights are drawn
    uniformly from (-1, 0) with ``prior_seed``; ``None`` gives zero priors.
    """
    if n < 1:
        raise InvalidInput("voting model needs n >= 1")
    if semantics not in SEMANTICS:
        raise InvalidInput(f"unknown semantics {semantics!r}")
    variables = [VariableSpec(0, "Q", (-1, 1))]
    variables += [VariableSpec(i, f"T{i}", (0, 1)) for i in range(1, n + 1)]
    variables += [VariableSpec(n + i, f"F{i}", (0, 1)) for i in range(1, n + 1)]
    if prior_seed is None:
        w_t = np.zeros(n)
        w_f = np.zeros(n)
    else:
        rng = make_rng(prior_seed, 0)
        w_t = rng.uniform(-1.0, 0.0, size=n)
        w_f = rng.uniform(-1.0, 0.0, size=n)

    t_ids = range(1, n + 1)
    f_ids = range(n + 1, 2 * n + 1)
    # rows Q = -1, 1; columns voter = 0, 1
    pro = np.array([[0.0, -1.0], [0.0, 1.0]])
    factors = []
    if semantics == "linear":
        factors += [TableFactor((0, t), w * pro, f"vote_T{i}") for i, t in enumerate(t_ids, 1)]
        factors += [TableFactor((0, f), -w * pro, f"vote_F{i}") for i, f in enumerate(f_ids, 1)]
    else:
        factors.append(AggregateFactor(
            w, semantics, [TableFactor((0, t), pro, f"T{i}") for i, t in enumerate(t_ids, 1)],
            "phi_T"))
        factors.append(AggregateFactor(
            w, semantics, [TableFactor((0, f), -pro, f"F{i}") for i, f in enumerate(f_ids, 1)],
            "phi_F"))
    factors += [TableFactor((t,), [0.0, w_t[i]], f"prior_T{i + 1}") for i, t in enumerate(t_ids)]
    factors += [TableFactor((f,), [0.0, w_f[i]], f"prior_F{i + 1}") for i, f in enumerate(f_ids)]
    return FactorGraph(variables, factors)


def build_path_graph(n: int, weights=None) -> FactorGraph:
    """n binary variables joined by n-1 pairwise factors (zero tables by default)."""
    variables = [VariableSpec(i, f"v{i + 1}", (0, 1)) for i in range(n)]
    factors = []
    for i in range(n - 1):
        table = np.zeros(4) if weights is None else np.asarray(weights[i], dtype=float)
        factors.append(TableFactor((i, i + 1), table, f"phi{i + 1}"))
    return FactorGraph(variables, factors)


def tree_edges(nodes: int, family: str, k: int | None = None) -> list[tuple[int, int]]:
    """Edge lists for the tree families.

    ``caterpillar`` takes a spine of ``k`` nodes and hangs the remaining
    nodes round-robin off the spine; ``k = 1`` is the star, ``k = nodes``
    the path.
    """
    if nodes < 2:
        raise InvalidInput("a tree needs at least two nodes")
    if family == "path":
        return [(i, i + 1) for i in range(nodes - 1)]
    if family == "star":
        return [(0, i) for i in range(1, nodes)]
    if family == "caterpillar":
        if k is None or not 1 <= k <= nodes:
            raise InvalidInput("caterpillar needs 1 <= k <= nodes")
        edges = [(i, i + 1) for i in range(k - 1)]
        edges += [(j % k, k + j) for j in range(nodes - k)]
        return edges
    raise InvalidInput(f"unknown tree family {family!r}")


def build_tree_ising(nodes: int, family: str = "path", k: int | None = None,
                     w: float = 0.9, compute_width: bool = True):
    """Ferromagnetic Ising model (spins -1/1, factor w*x*y per edge) on a tree.

    Returns ``(graph, hw)``; ``hw`` comes from a binary search over the
    bounded-k decision procedure (``None`` when ``compute_width`` is off).
    """
    edges = tree_edges(nodes, family, k)
    variables = [VariableSpec(i, f"s{i}", (-1, 1)) for i in range(nodes)]
    coupling = w * np.array([[1.0, -1.0], [-1.0, 1.0]])
    factors = [TableFactor((a, b), coupling, f"J{a}_{b}") for a, b in edges]
    graph = FactorGraph(variables, factors)
    hw = hierarchy_width_by_search(graph) if compute_width else None
    return graph, hw


def max_degree_node(graph: FactorGraph) -> int:
    degrees = [len(a) for a in graph.var_to_factors]
    return int(np.argmax(degrees))


def random_tree_graph(n: int, rng, weight: float = 1.0, unary: bool = True) -> FactorGraph:
    """Random binary tree-structured pairwise model with tables in [-weight, weight]."""
    variables = [VariableSpec(i, f"x{i}", (0, 1)) for i in range(n)]
    factors = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        factors.append(TableFactor((j, i), rng.uniform(-weight, weight, size=4), f"e{j}_{i}"))
    if unary:
        for i in range(n):
            factors.append(TableFactor((i,), rng.uniform(-weight, weight, size=2), f"u{i}"))
    return FactorGraph(variables, factors)


def random_factor_graph(rng, max_vars: int = 6, max_factors: int = 5, max_arity: int = 3,
                        max_states: int = 2, weight: float = 1.0, min_vars: int = 1) -> FactorGraph:
    """Random small graph: table entries uniform in [-weight, weight]."""
    n = int(rng.integers(min_vars, max_vars + 1))
    sizes = rng.integers(2, max_states + 1, size=n)
    variables = [VariableSpec(i, f"x{i}", tuple(range(int(sizes[i])))) for i in range(n)]
    m = int(rng.integers(0, max_factors + 1))
    factors = []
    for j in range(m):
        arity = int(rng.integers(1, min(max_arity, n) + 1))
        scope = tuple(int(v) for v in rng.choice(n, size=arity, replace=False))
        size = int(np.prod([sizes[v] for v in scope]))
        factors.append(TableFactor(scope, rng.uniform(-weight, weight, size=size), f"f{j}"))
    return FactorGraph(variables, factors)


def voting_dataset(n: int, w: float = 0.5, prior_seed: int | None = None):
    """Dataset for the shipped voting template matching ``build_voting_model``."""
    from .templates import Dataset
    ds = Dataset(objects={"Voter": [f"v{i}" for i in range(1, n + 1)]})
    ds.weights[("vote_T", ())] = w
    ds.weights[("vote_F", ())] = w
    if prior_seed is not None:
        rng = make_rng(prior_seed, 0)
        w_t = rng.uniform(-1.0, 0.0, size=n)
        w_f = rng.uniform(-1.0, 0.0, size=n)
        for i in range(n):
            ds.weights[("prior_T", (f"v{i + 1}",))] = float(w_t[i])
            ds.weights[("prior_F", (f"v{i + 1}",))] = float(w_f[i])
    return ds
