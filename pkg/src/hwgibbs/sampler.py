"""Seeded random-scan Gibbs sampling and the correlated-flip coupler.

Every step consumes two uniforms ``(u0, u1)`` from the chain's stream:
``u0`` picks the free variable ``free[floor(u0 * nfree)]`` and ``u1`` is
pushed through the inverse CDF of its conditional. The compiled kernels and
the pure-Python ``gibbs_step`` / ``coupled_step`` follow the same rule, and
numpy fills a ``(B, 2)`` block in the same order as ``B`` calls of
``random(2)``, so both paths see identical streams.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import beta

from . import _kernels as K
from .errors import InvalidInput
from .graph import FactorGraph, as_world, world_index
from .inference import DEFAULT_STATE_CAP, conditional_distribution, exact_joint
from .rng import make_rng

BLOCK = 1 << 16
INIT_MODES = ("uniform", "stationary")


def _inverse_cdf(p: np.ndarray, u: float) -> int:
    acc = 0.0
    for x in range(len(p) - 1):
        acc += p[x]
        if u < acc:
            return x
    return len(p) - 1


def gibbs_step(graph: FactorGraph, world, rng: np.random.Generator) -> np.ndarray:
    """One random-scan update; returns a new world and leaves ``world`` untouched."""
    out = as_world(graph, world)
    u0, u1 = rng.random(2)
    free = graph.free_variables
    if not free:
        return out
    v = free[int(u0 * len(free))]
    out[v] = _inverse_cdf(conditional_distribution(graph, out, v), u1)
    return out


def coupled_step(graph: FactorGraph, world_a, world_b, rng: np.random.Generator):
    """Advance two chains with a shared variable choice and a maximal coupling
    of their conditionals. Returns ``(a, b, still_unequal)``."""
    a = as_world(graph, world_a)
    b = as_world(graph, world_b)
    u0, u1 = rng.random(2)
    free = graph.free_variables
    if free:
        v = free[int(u0 * len(free))]
        pa = conditional_distribution(graph, a, v)
        pb = conditional_distribution(graph, b, v)
        common = np.minimum(pa, pb)
        overlap = common.sum()
        if u1 < overlap:
            a[v] = b[v] = _inverse_cdf(common, u1)
        else:
            r = u1 - overlap
            a[v] = _inverse_cdf(pa - common, r)
            b[v] = _inverse_cdf(pb - common, r)
    return a, b, bool(np.any(a != b))


@dataclass
class SamplerConfig:
    seed: int
    steps: int
    burn_in: int = 0
    init: object = "uniform"   # "uniform", "stationary", or a world (domain indices)

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInput("steps must be >= 1")
        if self.burn_in < 0:
            raise InvalidInput("burn_in must be >= 0")
        if isinstance(self.init, str) and self.init not in INIT_MODES:
            raise InvalidInput(f"unknown init mode {self.init!r}")


@dataclass
class ChainTrace:
    counts: list[np.ndarray]           # per variable, indexed by domain index
    final_world: np.ndarray
    steps: int
    burn_in: int = 0
    world_counts: np.ndarray | None = None   # row-major histogram over Omega

    def marginals(self) -> list[np.ndarray]:
        return [c / self.steps for c in self.counts]


def initial_world(graph: FactorGraph, init, rng: np.random.Generator,
                  cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """Starting state; evidence coordinates are always the clamped values."""
    if isinstance(init, str):
        if init == "uniform":
            sizes = np.asarray(graph.domain_sizes, dtype=np.int64)
            world = np.floor(rng.random(graph.n) * sizes).astype(np.int64)
        elif init == "stationary":
            joint = exact_joint(graph, cap)
            cdf = np.cumsum(joint.probabilities)
            idx = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cdf.size - 1)
            world = np.array(np.unravel_index(idx, joint.shape), dtype=np.int64) if graph.n \
                else np.zeros(0, dtype=np.int64)
        else:
            raise InvalidInput(f"unknown init mode {init!r}")
        for v, x in graph.evidence.items():
            world[v] = x
        return world
    world = as_world(graph, init)
    for v, x in graph.evidence.items():
        if world[v] != x:
            raise InvalidInput(f"init world disagrees with evidence on {graph.variables[v].name!r}")
    return world


class _Chain:
    """Mutable compiled chain state."""

    def __init__(self, graph: FactorGraph, compiled: K.CompiledGraph, world: np.ndarray,
                 rng: np.random.Generator, track: np.ndarray, histogram: bool):
        self.graph = graph
        self.c = compiled
        self.world = world.copy()
        self.rng = rng
        self.track = track
        self.agsum = np.zeros(max(compiled.n_agg, 1))
        K.agg_sums(compiled.arrays, self.world, self.agsum)
        self.counts = np.zeros((len(track), compiled.max_dom), dtype=np.int64)
        if histogram:
            self.hist = np.zeros(graph.num_worlds, dtype=np.int64)
            sizes = graph.domain_sizes
            strides = np.ones(graph.n, dtype=np.int64)
            for i in range(graph.n - 2, -1, -1):
                strides[i] = strides[i + 1] * sizes[i + 1]
            self.strides = strides
            self.hidx = world_index(graph, self.world)
        else:
            self.hist = np.zeros(0, dtype=np.int64)
            self.strides = np.zeros(max(graph.n, 1), dtype=np.int64)
            self.hidx = 0

    def advance(self, steps: int, record: bool) -> None:
        while steps > 0:
            b = min(steps, BLOCK)
            u = self.rng.random((b, 2))
            self.hidx = K.run_block(self.c.arrays, self.c.free, self.world, self.agsum, u,
                                    self.counts, self.track, self.hist, self.strides,
                                    self.hidx, record)
            steps -= b


def _start_chain(graph, config_init, rng, track=None, histogram=False, compiled=None):
    compiled = compiled or K.compile_graph(graph)
    world = initial_world(graph, config_init, rng)
    track = np.arange(graph.n, dtype=np.int64) if track is None else np.asarray(track, dtype=np.int64)
    return _Chain(graph, compiled, world, rng, track, histogram)


def run_chain(graph: FactorGraph, config: SamplerConfig, chain: int = 0,
              world_histogram: bool = False) -> ChainTrace:
    """Run ``burn_in + steps`` updates on stream ``(seed, chain)``.

    The world after each post-burn-in step is one recorded sample.
    """
    rng = make_rng(config.seed, chain)
    ch = _start_chain(graph, config.init, rng, histogram=world_histogram)
    ch.advance(config.burn_in, False)
    ch.advance(config.steps, True)
    counts = [ch.counts[v, :graph.domain_sizes[v]].copy() for v in range(graph.n)]
    return ChainTrace(counts, ch.world.copy(), config.steps, config.burn_in,
                      ch.hist if world_histogram else None)


@dataclass
class VarianceCurve:
    steps: np.ndarray
    variance: np.ndarray
    estimates: np.ndarray      # chains x len(steps)
    metadata: dict = field(default_factory=dict)


def query_index(graph: FactorGraph, query: int, value: int | None) -> int:
    """Domain index of ``value`` for ``query``; default is the label 1 (else the last value)."""
    var = graph.variables[query]
    if value is None:
        return var.index_of(1) if 1 in var.domain else var.domain_size - 1
    return var.index_of(value)


def running_estimates(graph: FactorGraph, variables: Sequence[int], chains: int,
                      schedule: Sequence[int], seed: int,
                      chain_seeds: Sequence[int] | None = None,
                      values: Sequence[int | None] | None = None, init="uniform"):
    """Running estimates of P(v = value) read off at every budget in ``schedule``.

    Chain ``c`` uses stream ``(seed, c)`` unless ``chain_seeds`` overrides it
    with ``(chain_seeds[c], 0)``. Returns ``(steps, estimates)`` with
    estimates shaped ``chains x len(steps) x len(variables)``.
    """
    schedule = np.asarray(sorted(set(int(s) for s in schedule)), dtype=np.int64)
    if schedule.size == 0 or schedule[0] < 1:
        raise InvalidInput("schedule must hold positive step counts")
    if chains < 1:
        raise InvalidInput("chains must be >= 1")
    if chain_seeds is not None and len(chain_seeds) != chains:
        raise InvalidInput("need one seed per chain")
    variables = [int(v) for v in variables]
    for v in variables:
        if not 0 <= v < graph.n:
            raise InvalidInput(f"variable {v} out of range")
    values = values if values is not None else [None] * len(variables)
    targets = np.array([query_index(graph, v, x) for v, x in zip(variables, values)], dtype=np.int64)
    rows = np.arange(len(variables))
    compiled = K.compile_graph(graph)
    est = np.zeros((chains, schedule.size, len(variables)))
    for c in range(chains):
        rng = make_rng(seed, c) if chain_seeds is None else make_rng(chain_seeds[c], 0)
        ch = _start_chain(graph, init, rng, track=variables, compiled=compiled)
        done = 0
        for j, s in enumerate(schedule):
            ch.advance(int(s) - done, True)
            done = int(s)
            est[c, j] = ch.counts[rows, targets] / done
    return schedule, est


def marginal_variance_experiment(graph: FactorGraph, query: int, chains: int,
                                 schedule: Sequence[int], seed: int,
                                 chain_seeds: Sequence[int] | None = None,
                                 value: int | None = None,
                                 init="uniform") -> VarianceCurve:
    """Across-chain variance of the running estimate of P(query = value).

    Each chain is run once to the largest budget and read off at every
    budget in ``schedule``.
    """
    if chains < 2:
        raise InvalidInput("chains must be >= 2")
    steps, est = running_estimates(graph, [query], chains, schedule, seed, chain_seeds,
                                   [value], init)
    est = est[:, :, 0]
    var = graph.variables[query]
    meta = {"variance": "across-chain, ddof=1", "init": str(init), "burn_in": 0,
            "chains": chains, "seed": seed, "query": var.name,
            "value": var.domain[query_index(graph, query, value)]}
    return VarianceCurve(steps, est.var(axis=0, ddof=1), est, meta)


@dataclass
class CouplingRecord:
    coupling_time: int | None          # None: not coupled within the budget
    disagreements: np.ndarray          # after each step, until coupling


def coupled_run(graph: FactorGraph, world_a, world_b, budget: int,
                rng: np.random.Generator, compiled: K.CompiledGraph | None = None) -> CouplingRecord:
    compiled = compiled or K.compile_graph(graph)
    a = as_world(graph, world_a)
    b = as_world(graph, world_b)
    sa = np.zeros(max(compiled.n_agg, 1))
    sb = np.zeros_like(sa)
    K.agg_sums(compiled.arrays, a, sa)
    K.agg_sums(compiled.arrays, b, sb)
    u = rng.random((budget, 2))
    diff = np.zeros(budget, dtype=np.int64)
    t = K.coupled_block(compiled.arrays, compiled.free, a, b, sa, sb, u, diff)
    if t < 0:
        return CouplingRecord(None, diff)
    return CouplingRecord(int(t), diff[:t])


@dataclass
class CouplingBound:
    k: np.ndarray
    p_tail: np.ndarray      # estimated P(T > k)
    upper: np.ndarray       # one-sided Clopper-Pearson upper limit
    times: np.ndarray       # per replicate; budget + 1 when not coupled
    alpha: float
    mode: str


def tv_bound_from_coupling(graph: FactorGraph, start, budget: int, replicates: int, seed: int,
                           other=None, alpha: float = 1e-3,
                           cap: int = DEFAULT_STATE_CAP) -> CouplingBound:
    """Estimate P(T > k) for k = 0..budget from coupled chains.

    With ``other=None`` the second chain starts from an exact stationary
    draw, so the curve bounds the distance of the chain from ``start`` to
    stationarity (needs the joint table, hence the state-space cap).
    Otherwise both starts are fixed and the curve bounds the distance
    between the two chains' laws.
    """
    if budget < 0 or replicates < 1:
        raise InvalidInput("budget must be >= 0 and replicates >= 1")
    start = initial_world(graph, start, make_rng(seed, 0))
    compiled = K.compile_graph(graph)
    if other is None:
        joint = exact_joint(graph, cap)
        cdf = np.cumsum(joint.probabilities)
        mode = "stationary"
    else:
        fixed = initial_world(graph, other, make_rng(seed, 0))
        mode = "two-start"
    times = np.empty(replicates, dtype=np.int64)
    for r in range(replicates):
        rng = make_rng(seed, r)
        if other is None:
            idx = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cdf.size - 1)
            b = np.array(np.unravel_index(idx, joint.shape), dtype=np.int64) if graph.n \
                else np.zeros(0, dtype=np.int64)
        else:
            b = fixed
        rec = coupled_run(graph, start, b, budget, rng, compiled)
        times[r] = budget + 1 if rec.coupling_time is None else rec.coupling_time
    k = np.arange(budget + 1)
    tail = np.array([(times > kk).sum() for kk in k], dtype=np.int64)
    p = tail / replicates
    upper = np.where(tail >= replicates, 1.0,
                     beta.ppf(1.0 - alpha, tail + 1, np.maximum(replicates - tail, 1)))
    return CouplingBound(k, p, upper, times, alpha, mode)
