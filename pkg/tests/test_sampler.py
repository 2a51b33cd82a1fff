import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hwgibbs.builders import build_path_graph, build_voting_model, random_factor_graph
from hwgibbs.errors import InvalidInput
from hwgibbs.graph import FactorGraph, TableFactor, VariableSpec, world_from_labels, world_index
from hwgibbs.inference import conditional_distribution, exact_joint, exact_marginals_acyclic
from hwgibbs.rng import make_rng
from hwgibbs.sampler import (SamplerConfig, coupled_run, coupled_step, gibbs_step,
                             marginal_variance_experiment, query_index, run_chain,
                             running_estimates, tv_bound_from_coupling)
from hwgibbs.spectral import total_variation, transition_matrix

from conftest import random_mixed_graph


class FixedUniforms:
    """Stand-in generator replaying a fixed list of uniform pairs."""

    def __init__(self, pairs):
        self.pairs = list(pairs)

    def random(self, size):
        assert size == 2
        return np.array(self.pairs.pop(0))


def batch_means(graph, var, steps, batches, seed, value=None):
    """Mean and batch-means standard error of P(var = value) from one chain."""
    schedule = [steps * (b + 1) // batches for b in range(batches)]
    s, est = running_estimates(graph, [var], 1, schedule, seed, values=[value])
    cum = est[0, :, 0] * s
    per = np.diff(np.concatenate([[0.0], cum])) / np.diff(np.concatenate([[0], s]))
    return cum[-1] / s[-1], per.std(ddof=1) / np.sqrt(batches)


# -- gibbs_step ---------------------------------------------------------------

def test_single_variable_step_draws_the_stationary_law():
    g = FactorGraph([VariableSpec(0, "a", (0, 1, 2))], [TableFactor((0,), [0.2, -0.4, 1.1])])
    pi = exact_joint(g).probabilities
    grid = (np.arange(30000) + 0.5) / 30000
    draws = [gibbs_step(g, [0], FixedUniforms([(0.3, u)]))[0] for u in grid]
    freq = np.bincount(draws, minlength=3) / grid.size
    assert np.allclose(freq, pi, atol=1e-4)


def test_step_changes_at_most_the_chosen_coordinate():
    g = build_voting_model(3, "logical", prior_seed=2)
    rng = make_rng(4, 0)
    world = np.zeros(g.n, dtype=np.int64)
    for _ in range(200):
        new = gibbs_step(g, world, rng)
        assert (new != world).sum() <= 1
        world = new


def test_zero_weights_give_uniform_site_and_value():
    g = FactorGraph([VariableSpec(i, f"x{i}", (0, 1, 2)) for i in range(3)],
                    [TableFactor((0, 1, 2), np.zeros(27))])
    rng = make_rng(11, 0)
    hits = np.zeros((3, 3))
    trials = 30000
    for _ in range(trials):
        u0, u1 = rng.random(2)
        out = gibbs_step(g, [0, 0, 0], FixedUniforms([(u0, u1)]))
        v = int(u0 * 3)
        hits[v, out[v]] += 1
    assert np.allclose(hits / trials, 1 / 9, atol=0.01)


def test_kernel_matches_reference_step_bit_for_bit():
    for seed in range(5):
        g = random_mixed_graph(np.random.default_rng(seed))
        world = np.zeros(g.n, dtype=np.int64)
        trace = run_chain(g, SamplerConfig(seed=seed, steps=500, init=world))
        rng = make_rng(seed, 0)
        ref = world.copy()
        counts = [np.zeros(s) for s in g.domain_sizes]
        for _ in range(500):
            ref = gibbs_step(g, ref, rng)
            for v in range(g.n):
                counts[v][ref[v]] += 1
        assert np.array_equal(trace.final_world, ref)
        for a, b in zip(trace.counts, counts):
            assert np.array_equal(a, b)


def test_voting_logical_query_marginal():
    g = build_voting_model(2, "logical", 0.5)
    truth = exact_joint(g).marginals()[0][1]
    est, se = batch_means(g, 0, 10 ** 5, 20, seed=3)
    assert abs(est - truth) <= 3 * se


# -- run_chain ----------------------------------------------------------------

def test_single_step_counts_one_sample():
    g = FactorGraph([VariableSpec(0, "a", (0, 1))], [])
    tr = run_chain(g, SamplerConfig(seed=0, steps=1))
    assert tr.steps == 1 and sum(tr.counts[0]) == 1


def test_same_seed_same_trace():
    g = build_voting_model(3, "ratio", prior_seed=1)
    cfg = SamplerConfig(seed=42, steps=5000, burn_in=100)
    a, b = run_chain(g, cfg), run_chain(g, cfg)
    assert np.array_equal(a.final_world, b.final_world)
    assert all(np.array_equal(x, y) for x, y in zip(a.counts, b.counts))
    c = run_chain(g, cfg, chain=1)
    assert not all(np.array_equal(x, y) for x, y in zip(a.counts, c.counts))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3000), st.integers(0, 50))
def test_counts_sum_to_recorded_steps(seed, steps, burn):
    g = random_mixed_graph(np.random.default_rng(seed))
    tr = run_chain(g, SamplerConfig(seed=seed, steps=steps, burn_in=burn), world_histogram=True)
    for c in tr.counts:
        assert c.sum() == steps
    assert tr.world_counts.sum() == steps
    for m in tr.marginals():
        assert m.sum() == pytest.approx(1.0)


def test_path_marginals_within_three_standard_errors():
    rng = make_rng(5, 0)
    g = build_path_graph(10, [rng.uniform(-1, 1, size=4) for _ in range(9)])
    truth = exact_marginals_acyclic(g)
    for v in range(g.n):
        est, se = batch_means(g, v, 10 ** 6, 25, seed=9)
        assert abs(est - truth[v][1]) <= 3 * se, v


def test_config_validation():
    with pytest.raises(InvalidInput):
        SamplerConfig(seed=0, steps=0)
    with pytest.raises(InvalidInput):
        SamplerConfig(seed=0, steps=1, burn_in=-1)
    with pytest.raises(InvalidInput):
        SamplerConfig(seed=0, steps=1, init="hot")


def test_init_world_validation_and_evidence():
    g = build_path_graph(3).with_evidence({1: 1})
    with pytest.raises(InvalidInput):
        run_chain(g, SamplerConfig(seed=0, steps=10, init=[0, 0, 0]))
    with pytest.raises(InvalidInput):
        run_chain(g, SamplerConfig(seed=0, steps=10, init=[0, 2, 0]))
    tr = run_chain(g, SamplerConfig(seed=0, steps=2000))
    assert tr.counts[1][1] == 2000


def test_stationary_init_runs():
    g = build_voting_model(2, "logical")
    tr = run_chain(g, SamplerConfig(seed=1, steps=10, init="stationary"))
    assert tr.steps == 10


def test_query_index_default():
    g = build_voting_model(1, "logical")
    assert query_index(g, 0, None) == 1
    assert query_index(g, 0, -1) == 0
    h = FactorGraph([VariableSpec(0, "a", (5, 7))], [])
    assert query_index(h, 0, None) == 1


# -- variance experiment --------------------------------------------------------

def test_near_deterministic_variable_has_zero_variance():
    g = FactorGraph([VariableSpec(0, "a", (0, 1))], [TableFactor((0,), [0.0, 50.0])])
    curve = marginal_variance_experiment(g, 0, 5, [10, 100, 1000], seed=0)
    assert np.all(curve.variance == 0.0)


def test_identical_streams_give_zero_variance():
    g = build_voting_model(3, "logical", prior_seed=0)
    same = marginal_variance_experiment(g, 0, 4, [500, 2000], seed=0, chain_seeds=[7] * 4)
    assert np.all(same.variance == 0.0)
    diff = marginal_variance_experiment(g, 0, 4, [500, 2000], seed=0)
    assert np.all(diff.variance > 0.0)


def test_variance_metadata_and_validation():
    g = build_voting_model(2, "logical")
    curve = marginal_variance_experiment(g, 0, 3, [100, 50], seed=0)
    assert list(curve.steps) == [50, 100]
    assert curve.estimates.shape == (3, 2)
    assert curve.metadata["value"] == 1 and "across-chain" in curve.metadata["variance"]
    with pytest.raises(InvalidInput):
        marginal_variance_experiment(g, 0, 1, [100], seed=0)
    with pytest.raises(InvalidInput):
        running_estimates(g, [0], 2, [0], seed=0)


def test_estimates_prefix_consistent():
    g = build_voting_model(2, "ratio")
    s1, e1 = running_estimates(g, [0, 1], 2, [300], seed=5)
    s2, e2 = running_estimates(g, [0, 1], 2, [100, 300], seed=5)
    assert np.array_equal(e1[:, 0], e2[:, 1])


# -- coupler ------------------------------------------------------------------

def test_equal_worlds_stay_equal():
    g = build_voting_model(2, "logical", prior_seed=3)
    rng = make_rng(0, 0)
    a = b = np.zeros(g.n, dtype=np.int64)
    for _ in range(300):
        a, b, unequal = coupled_step(g, a, b, rng)
        assert not unequal and np.array_equal(a, b)


def test_free_variable_receives_identical_draw():
    g = FactorGraph([VariableSpec(0, "a", (0, 1, 2)), VariableSpec(1, "b", (0, 1))],
                    [TableFactor((1,), [0.0, 1.0])])
    rng = make_rng(2, 0)
    for _ in range(200):
        u = rng.random(2)
        a, b, _ = coupled_step(g, [0, 0], [2, 1], FixedUniforms([u]))
        if int(u[0] * 2) == 0:
            assert a[0] == b[0]


def test_disagreement_frequency_equals_conditional_tv():
    g = build_voting_model(2, "logical", 0.8, prior_seed=4)
    a0 = world_from_labels(g, [1, 1, 1, 0, 0])
    b0 = world_from_labels(g, [-1, 0, 1, 1, 0])
    rng = make_rng(8, 0)
    trials = 10 ** 5
    picked = np.zeros(g.n)
    split = np.zeros(g.n)
    for _ in range(trials):
        u = rng.random(2)
        v = int(u[0] * g.n)
        a, b, _ = coupled_step(g, a0, b0, FixedUniforms([u]))
        picked[v] += 1
        split[v] += a[v] != b[v]
    for v in range(g.n):
        tv = total_variation(conditional_distribution(g, a0, v), conditional_distribution(g, b0, v))
        tol = 4 * np.sqrt(tv * (1 - tv) / picked[v]) + 1e-12
        assert abs(split[v] / picked[v] - tv) <= tol, v


def test_binary_coupler_matches_min_rule():
    g = FactorGraph([VariableSpec(0, "a", (0, 1)), VariableSpec(1, "b", (0, 1))],
                    [TableFactor((0, 1), [0.0, 0.4, -0.2, 1.0])])
    p = conditional_distribution(g, [0, 0], 1)[1]
    q = conditional_distribution(g, [1, 0], 1)[1]
    grid = (np.arange(20000) + 0.5) / 20000
    both1 = both0 = 0
    for u in grid:
        a, b, _ = coupled_step(g, [0, 0], [1, 0], FixedUniforms([(0.9, u)]))
        both1 += a[1] == 1 and b[1] == 1
        both0 += a[1] == 0 and b[1] == 0
    assert both1 / grid.size == pytest.approx(min(p, q), abs=1e-4)
    assert both0 / grid.size == pytest.approx(min(1 - p, 1 - q), abs=1e-4)


def test_each_coupled_chain_has_the_gibbs_marginal_law():
    g = random_factor_graph(make_rng(3, 0), max_vars=3, max_factors=3, max_states=3)
    tm = transition_matrix(g)
    a0 = np.zeros(g.n, dtype=np.int64)
    b0 = np.array(g.domain_sizes) - 1
    rng = make_rng(6, 0)
    trials = 40000
    ha = np.zeros(g.num_worlds)
    hb = np.zeros(g.num_worlds)
    for _ in range(trials):
        a, b, _ = coupled_step(g, a0, b0, rng)
        ha[world_index(g, a)] += 1
        hb[world_index(g, b)] += 1
    Pd = tm.P.toarray()
    for h, start in ((ha, a0), (hb, b0)):
        row = Pd[world_index(g, start)]
        se = np.sqrt(row * (1 - row) / trials)
        assert np.all(np.abs(h / trials - row) <= 5 * se + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_no_new_disagreement_when_conditionals_match(seed):
    rng = np.random.default_rng(seed)
    g = random_mixed_graph(rng)
    a = np.array([rng.integers(0, s) for s in g.domain_sizes])
    b = np.array([rng.integers(0, s) for s in g.domain_sizes])
    for _ in range(30):
        u = rng.random(2)
        v = int(u[0] * g.n)
        same = np.allclose(conditional_distribution(g, a, v), conditional_distribution(g, b, v),
                           atol=0, rtol=0)
        before = int((a != b).sum())
        a, b, _ = coupled_step(g, a, b, FixedUniforms([u]))
        if same:
            assert a[v] == b[v]
            assert int((a != b).sum()) <= before


def test_compiled_coupler_matches_reference():
    g = build_voting_model(2, "ratio", prior_seed=5)
    a0 = world_from_labels(g, [1, 1, 1, 0, 0])
    b0 = world_from_labels(g, [-1, 0, 0, 1, 1])
    for seed in range(20):
        rec = coupled_run(g, a0, b0, 400, make_rng(seed, 0))
        rng = make_rng(seed, 0)
        a, b = a0, b0
        diffs = []
        for t in range(400):
            a, b, unequal = coupled_step(g, a, b, rng)
            diffs.append(int((a != b).sum()))
            if not unequal:
                break
        if rec.coupling_time is None:
            assert diffs[-1] > 0 and len(diffs) == 400
        else:
            assert rec.coupling_time == len(diffs)
        assert list(rec.disagreements) == diffs


def test_disagreements_reach_zero_at_coupling_time():
    g = build_voting_model(3, "logical")
    a0 = world_from_labels(g, [1] + [1] * 3 + [0] * 3)
    b0 = world_from_labels(g, [-1] + [0] * 3 + [1] * 3)
    rec = coupled_run(g, a0, b0, 10000, make_rng(1, 0))
    assert rec.coupling_time is not None
    assert rec.disagreements[-1] == 0 and np.all(rec.disagreements[:-1] > 0)
    assert len(rec.disagreements) == rec.coupling_time


# -- coupling bound -----------------------------------------------------------

def test_zero_budget_bound_is_one_for_distinct_starts():
    g = build_voting_model(2, "logical")
    bound = tv_bound_from_coupling(g, [0] * g.n, 0, 50, seed=0, other=[1] * g.n)
    assert bound.p_tail[0] == 1.0 and bound.upper[0] == 1.0
    assert bound.mode == "two-start"


def test_single_variable_couples_in_one_step():
    g = FactorGraph([VariableSpec(0, "a", (0, 1, 2))], [TableFactor((0,), [0.1, 0.5, -2.0])])
    bound = tv_bound_from_coupling(g, [0], 5, 300, seed=2)
    assert bound.mode == "stationary"
    assert np.all(bound.p_tail[1:] == 0.0)
    assert np.all(bound.times <= 1)


def test_bound_upper_band_dominates_estimate():
    g = build_voting_model(2, "logical")
    bound = tv_bound_from_coupling(g, "uniform", 60, 400, seed=1)
    assert np.all(bound.upper >= bound.p_tail)
    assert np.all(np.diff(bound.p_tail) <= 0)


def test_bound_validation():
    g = build_voting_model(1, "logical")
    with pytest.raises(InvalidInput):
        tv_bound_from_coupling(g, [0, 0, 0], -1, 10, seed=0)
    with pytest.raises(InvalidInput):
        tv_bound_from_coupling(g, [0, 0, 0], 10, 0, seed=0)
