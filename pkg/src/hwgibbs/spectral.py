"""Exact Gibbs transition matrices, spectral gaps, mixing times and bounds.

All computations run on the conditioned graph: clamped variables are
removed, so ``n`` counts free variables and worlds are row-major over the
free variables' domains (variable 0 varies slowest).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.special import logsumexp
from scipy.stats import chi2

from .errors import InvalidInput, ResourceLimit
from .graph import FactorGraph, as_world
from .inference import energy_grid, exact_joint, factor_weight_range, max_factor_weight

SPECTRAL_CAP = 2 ** 14
EIGEN_CAP = 2 ** 12
ALL_STARTS_CAP = 2 ** 11
BALANCE_TOL = 1e-8
LEMMA_TOL = 1e-8


@dataclass
class TransitionMatrix:
    P: sp.csr_matrix
    pi: np.ndarray
    shape: tuple[int, ...]       # free-variable domain sizes
    free: tuple[int, ...]        # original ids of the free variables

    @property
    def dimension(self) -> int:
        return self.P.shape[0]


def _strides(shape) -> np.ndarray:
    strides = np.ones(len(shape), dtype=np.int64)
    for i in range(len(shape) - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    return strides


def transition_matrix(graph: FactorGraph, cap: int = SPECTRAL_CAP) -> TransitionMatrix:
    """Random-scan Gibbs kernel P(x, y) = (1/n) p(y_v | x_{-v}) for single-site moves."""
    cond, free = graph.condition()
    if cond.num_worlds > cap:
        raise ResourceLimit(f"|Omega| = {cond.num_worlds} exceeds the spectral cap {cap}")
    shape = tuple(cond.domain_sizes)
    N = cond.num_worlds
    if cond.n == 0:
        return TransitionMatrix(sp.csr_matrix(np.ones((1, 1))), np.ones(1), shape, free)
    grid = energy_grid(cond, cap)
    flat_idx = np.arange(N, dtype=np.int64)
    strides = _strides(shape)
    rows, cols, vals = [], [], []
    n = cond.n
    for v in range(n):
        logc = (grid - logsumexp(grid, axis=v, keepdims=True)).ravel()
        xv = (flat_idx // strides[v]) % shape[v]
        for y in range(shape[v]):
            j = flat_idx + (y - xv) * strides[v]
            off = j != flat_idx
            rows.append(flat_idx[off])
            cols.append(j[off])
            vals.append(np.exp(logc[j[off]]) / n)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    offdiag = np.bincount(rows, weights=vals, minlength=N)
    rows = np.concatenate([rows, flat_idx])
    cols = np.concatenate([cols, flat_idx])
    vals = np.concatenate([vals, 1.0 - offdiag])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    pi = exact_joint(cond, cap).probabilities
    return TransitionMatrix(P, pi, shape, free)


def detailed_balance_error(P, pi) -> float:
    P = sp.csr_matrix(P)
    flow = sp.diags(pi) @ P
    return float(abs(flow - flow.T).max()) if flow.nnz else 0.0


@dataclass
class SpectralReport:
    gamma: float
    lambda_2: float
    lambda_min: float
    pi_min: float
    eigenvalues: np.ndarray = field(repr=False)


def absolute_spectral_gap(P, pi, cap: int = EIGEN_CAP) -> SpectralReport:
    """Gap of a reversible kernel via the symmetric matrix Pi^{1/2} P Pi^{-1/2}."""
    pi = np.asarray(pi, dtype=float)
    N = pi.size
    if P.shape != (N, N):
        raise InvalidInput("P and pi have mismatched dimensions")
    if N > cap:
        raise ResourceLimit(f"dense eigensolve on {N} states exceeds the cap {cap}")
    if np.any(pi <= 0):
        raise InvalidInput("stationary distribution must be strictly positive")
    err = detailed_balance_error(P, pi)
    if err > BALANCE_TOL:
        raise InvalidInput(f"kernel is not reversible w.r.t. pi (detailed-balance error {err:.3g})")
    dense = P.toarray() if sp.issparse(P) else np.asarray(P, dtype=float)
    r = np.sqrt(pi)
    S = dense * r[:, None] / r[None, :]
    S = 0.5 * (S + S.T)
    eig = eigh(S, eigvals_only=True)
    if N == 1:
        return SpectralReport(1.0, float("nan"), float(eig[0]), float(pi[0]), eig)
    rest = eig[:-1]    # drop the dominant eigenvalue 1
    gamma = 1.0 - max(abs(rest[-1]), abs(rest[0]))
    gamma = min(max(gamma, 0.0), 1.0)
    return SpectralReport(float(gamma), float(rest[-1]), float(eig[0]), float(pi.min()), eig)


def spectral_report(graph: FactorGraph) -> SpectralReport:
    tm = transition_matrix(graph)
    return absolute_spectral_gap(tm.P, tm.pi)


def total_variation(mu, nu) -> float:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise InvalidInput(f"distributions have shapes {mu.shape} and {nu.shape}")
    return float(0.5 * np.abs(mu - nu).sum())


def _worst_tv(D: np.ndarray, pi: np.ndarray) -> float:
    return float(0.5 * np.abs(D - pi[None, :]).sum(axis=1).max())


@dataclass
class MixingResult:
    t_mix: int
    mode: str          # "worst-case" or "single-start (lower-bound estimate)"


def _conditioned_start(graph: FactorGraph, tm: TransitionMatrix, start) -> int:
    world = as_world(graph, start)
    for v, x in graph.evidence.items():
        if world[v] != x:
            raise InvalidInput("start world disagrees with evidence")
    sub = world[list(tm.free)]
    return int(np.ravel_multi_index(tuple(sub), tm.shape)) if tm.shape else 0


def mixing_time(graph: FactorGraph, start=None, epsilon: float = 0.25,
                max_steps: int = 10 ** 7, cap: int = SPECTRAL_CAP,
                all_starts_cap: int = ALL_STARTS_CAP) -> MixingResult:
    """First t with d(t) <= epsilon.

    Without ``start`` the maximum over all point-mass starts is taken (needs
    |Omega| <= ``all_starts_cap``); with a start only that row is followed,
    which can only underestimate the worst-case mixing time.
    """
    tm = transition_matrix(graph, cap)
    pi = tm.pi
    N = tm.dimension
    if start is None:
        if N > all_starts_cap:
            raise ResourceLimit(
                f"worst-case start needs |Omega| <= {all_starts_cap}; pass a start world")
        if 1.0 - pi.min() <= epsilon:
            return MixingResult(0, "worst-case")
        return MixingResult(_doubling_mixing(tm.P.toarray(), pi, epsilon, max_steps), "worst-case")
    row = np.zeros(N)
    row[_conditioned_start(graph, tm, start)] = 1.0
    PT = tm.P.T.tocsr()
    t = 0
    while total_variation(row, pi) > epsilon:
        if t >= max_steps:
            raise ResourceLimit(f"not mixed within {max_steps} steps")
        row = PT @ row
        t += 1
    return MixingResult(t, "single-start (lower-bound estimate)")


def _doubling_mixing(P: np.ndarray, pi: np.ndarray, epsilon: float, max_steps: int) -> int:
    # d(t) is nonincreasing, so square until mixed and then binary-lift.
    powers = [P]
    while _worst_tv(powers[-1], pi) > epsilon:
        if 2 ** len(powers) > 2 * max_steps:
            raise ResourceLimit(f"not mixed within {max_steps} steps")
        powers.append(powers[-1] @ powers[-1])
    j = len(powers) - 1
    if j == 0:
        return 1
    A = powers[j - 1]
    t = 2 ** (j - 1)
    for i in range(j - 2, -1, -1):
        B = A @ powers[i]
        if _worst_tv(B, pi) > epsilon:
            A = B
            t += 2 ** i
    return t + 1


def exact_mixing_time(graph: FactorGraph, start=None, **kwargs) -> int:
    return mixing_time(graph, start, **kwargs).t_mix


def tv_curve(graph: FactorGraph, start, steps: int, cap: int = SPECTRAL_CAP) -> np.ndarray:
    """Exact TV(P^k(start, .), pi) for k = 0..steps."""
    tm = transition_matrix(graph, cap)
    row = np.zeros(tm.dimension)
    row[_conditioned_start(graph, tm, start)] = 1.0
    PT = tm.P.T.tocsr()
    out = np.empty(steps + 1)
    for k in range(steps + 1):
        out[k] = total_variation(row, tm.pi)
        row = PT @ row
    return out


def theorem2_bound(n: float, s: float, e: float, M: float, h: float) -> float:
    """(log 4 + n log s + e M) n exp(3 h M)."""
    if min(n, e, M, h) < 0 or s < 1:
        raise InvalidInput("theorem2_bound needs nonnegative arguments and s >= 1")
    return (math.log(4) + n * math.log(s) + e * M) * n * math.exp(3 * h * M)


def relaxation_bound(gamma: float, pi_min: float, epsilon: float) -> float:
    """-log(epsilon * pi_min) / gamma."""
    if not 0 < gamma <= 1:
        raise InvalidInput("gamma must lie in (0, 1]")
    if not 0 < pi_min <= 1:
        raise InvalidInput("pi_min must lie in (0, 1]")
    if not 0 < epsilon < 1:
        raise InvalidInput("epsilon must lie in (0, 1)")
    return -math.log(epsilon * pi_min) / gamma


def gap_lower_bound(n: int, hw: int, M: float) -> float:
    """(1/n) exp(-3 hw M)."""
    return math.exp(-3.0 * hw * M) / n


def markov_chi_square(tm: TransitionMatrix, counts) -> tuple[float, int, float]:
    """Goodness of fit of world counts from a stationary run of the chain.

    Consecutive states are correlated, so the multinomial covariance is
    replaced by the chain's asymptotic covariance
    ``S_ij = pi_i Z_ij + pi_j Z_ji - pi_i d_ij - pi_i pi_j`` with the
    fundamental matrix ``Z = (I - P + 1 pi^T)^{-1}``. Returns
    ``(statistic, dof, p_value)``.
    """
    counts = np.asarray(counts, dtype=float)
    pi = tm.pi
    N = counts.sum()
    if counts.shape != pi.shape or N <= 0:
        raise InvalidInput("counts must cover every world and be non-empty")
    P = tm.P.toarray()
    Z = np.linalg.inv(np.eye(pi.size) - P + np.outer(np.ones(pi.size), pi))
    S = pi[:, None] * Z + (pi[:, None] * Z).T - np.diag(pi) - np.outer(pi, pi)
    S = 0.5 * (S + S.T)
    d = counts / N - pi
    dof = pi.size - 1
    stat = float(N * d @ np.linalg.pinv(S, rcond=1e-10, hermitian=True) @ d)
    return stat, dof, float(chi2.sf(stat, dof))


@dataclass
class LemmaCheck:
    name: str
    lhs: float
    rhs: float
    ok: bool
    detail: str = ""


def _ge(name, lhs, rhs, tol=LEMMA_TOL, detail=""):
    return LemmaCheck(name, float(lhs), float(rhs), bool(lhs >= rhs - tol), detail)


@dataclass
class BoundsRow:
    n: int
    s: int
    e: int
    M: float
    hw: int
    gamma: float
    pi_min: float
    t_mix_exact: int | None
    theorem2_bound: float
    relaxation_bound: float


def bounds_row(graph: FactorGraph, mixing: bool = True) -> BoundsRow:
    from .width import hierarchy_width
    cond, _ = graph.condition()
    tm = transition_matrix(cond)
    rep = absolute_spectral_gap(tm.P, tm.pi)
    hw = hierarchy_width(cond)
    M = max_factor_weight(cond)
    s = max(cond.domain_sizes, default=1)
    t = exact_mixing_time(cond) if mixing else None
    relax = relaxation_bound(rep.gamma, rep.pi_min, 0.25) if rep.gamma > 0 else math.inf
    return BoundsRow(cond.n, s, len(cond.factors), M, hw, rep.gamma, rep.pi_min, t,
                     theorem2_bound(cond.n, s, len(cond.factors), M, hw), relax)


def verify_lemmas(graph: FactorGraph, mixing: bool = True) -> list[LemmaCheck]:
    """Check the spectral-gap and mixing inequalities on one small graph."""
    from .width import hierarchy_width
    cond, _ = graph.condition()
    checks: list[LemmaCheck] = []
    tm = transition_matrix(cond)
    rep = absolute_spectral_gap(tm.P, tm.pi)
    n = cond.n
    checks.append(LemmaCheck("detailed-balance", detailed_balance_error(tm.P, tm.pi), 1e-10,
                             detailed_balance_error(tm.P, tm.pi) <= 1e-10))
    stat_err = float(np.abs(tm.P.T @ tm.pi - tm.pi).max())
    checks.append(LemmaCheck("stationarity", stat_err, 1e-10, stat_err <= 1e-10))
    hw = hierarchy_width(cond)
    M = max_factor_weight(cond)
    if n > 0:
        checks.append(_ge("gap-lemma", rep.gamma, gap_lower_bound(n, hw, M)))

    # one-factor removal: spectral comparison and the exp(+-M) sandwich
    P_full = tm.P.tocoo()
    for i, factor in enumerate(cond.factors):
        sub = cond.without_factor(i)
        tm_bar = transition_matrix(sub)
        rep_bar = absolute_spectral_gap(tm_bar.P, tm_bar.pi)
        Mi = factor_weight_range(factor)
        name = cond.factor_name(i)
        checks.append(_ge("factor-removal", rep.gamma, rep_bar.gamma * math.exp(-3 * Mi), detail=name))
        ratio = tm.pi / tm_bar.pi
        checks.append(_ge("pi-sandwich-upper", math.exp(Mi), ratio.max(), detail=name))
        checks.append(_ge("pi-sandwich-lower", ratio.min(), math.exp(-Mi), detail=name))
        off = P_full.row != P_full.col
        r, c = P_full.row[off], P_full.col[off]
        pr = np.asarray(P_full.tocsr()[r, c]).ravel() / np.asarray(tm_bar.P.tocsr()[r, c]).ravel()
        if pr.size:
            checks.append(_ge("P-sandwich-upper", math.exp(Mi), pr.max(), detail=name))
            checks.append(_ge("P-sandwich-lower", pr.min(), math.exp(-Mi), detail=name))

    comps = cond.connected_components()
    if len(comps) > 1:
        parts = []
        for comp in comps:
            g_i = cond.subgraph(comp)
            tm_i = transition_matrix(g_i)
            parts.append((len(comp), absolute_spectral_gap(tm_i.P, tm_i.pi)))
        bound = min(ni / n * r_i.gamma for ni, r_i in parts)
        checks.append(_ge("component-gap", rep.gamma, bound))
        combos = np.array(sorted(sum(ni / n * lam for (ni, _), lam in zip(parts, choice))
                                 for choice in product(*(r_i.eigenvalues for _, r_i in parts))))
        err = float(np.abs(np.sort(rep.eigenvalues) - combos).max())
        checks.append(LemmaCheck("component-eigenvalues", err, LEMMA_TOL, err <= LEMMA_TOL))

    if mixing and n > 0:
        t = exact_mixing_time(cond)
        s = max(cond.domain_sizes)
        checks.append(_ge("theorem2-mixing", math.ceil(theorem2_bound(n, s, len(cond.factors), M, hw)), t))
        if rep.gamma > 0:
            checks.append(_ge("relaxation-mixing",
                              math.ceil(relaxation_bound(rep.gamma, rep.pi_min, 0.25)), t))
    return checks
