"""Experiment drivers and their configuration files.

A config file is flat ``key = value`` text; ``#`` starts a comment and
lists are comma-separated. Every CSV written here starts with ``# key =
value`` lines holding the full resolved config, so a rerun with the same
header reproduces the data rows byte for byte.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .builders import (build_tree_ising, build_voting_model, max_degree_node,
                       random_factor_graph)
from .errors import InvalidInput
from .graph import SEMANTICS
from .inference import exact_marginals_acyclic
from .rng import make_rng
from .sampler import SamplerConfig, marginal_variance_experiment, query_index, run_chain
from .spectral import verify_lemmas

EXPERIMENTS = ("voting-convergence", "ising-hw", "verify-bounds")

DEFAULTS = {
    "voting-convergence": {
        "n": 50, "w": 0.5, "chains": 20, "semantics": list(SEMANTICS),
        "schedule": [1000, 2000, 5000, 10000, 20000, 50000, 100000], "prior_seed": None,
    },
    "ising-hw": {
        "nodes": 60, "weights": [0.5, 0.7, 0.9], "families": ["path", "caterpillar", "star"],
        "k": None, "budget": 100000, "seeds": 20,
    },
    "verify-bounds": {
        "graphs": 200, "max_vars": 6, "max_factors": 5, "max_arity": 3, "weight": 1.0,
        "mixing": True,
    },
}

SUBSTITUTIONS = {
    "voting-convergence": "variance is across chains at fixed budgets; burn-in 0; uniform start",
    "ising-hw": "60-node trees; MSE of the max-degree node marginal over seeded chains; "
                "caterpillar(k) spans star (k=1) to path (k=nodes); default k = round(sqrt(nodes))",
    "verify-bounds": "random small graphs; exact spectral and mixing oracles",
}


def _coerce(raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if "," in raw:
        return [_coerce(x) for x in raw.split(",") if x.strip()]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise InvalidInput(f"config line {lineno}: empty key")
        out[key] = _coerce(value)
    return out


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name: str, seed: int = 0, **overrides) -> "ExperimentConfig":
        if name not in EXPERIMENTS:
            raise InvalidInput(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
        params = dict(DEFAULTS[name])
        for key, value in overrides.items():
            if key not in params:
                raise InvalidInput(f"unknown parameter {key!r} for {name}")
            params[key] = value
        cfg = cls(name, int(seed), params)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        p = self.params
        if self.name == "voting-convergence":
            sems = p["semantics"] if isinstance(p["semantics"], list) else [p["semantics"]]
            p["semantics"] = sems
            for s in sems:
                if s not in SEMANTICS:
                    raise InvalidInput(f"unknown semantics {s!r}")
            p["schedule"] = p["schedule"] if isinstance(p["schedule"], list) else [p["schedule"]]
            if p["chains"] < 2:
                raise InvalidInput("chains must be >= 2")
            if p["n"] < 1:
                raise InvalidInput("n must be >= 1")
        elif self.name == "ising-hw":
            for key in ("weights", "families"):
                if not isinstance(p[key], list):
                    p[key] = [p[key]]
            for fam in p["families"]:
                if fam not in ("path", "caterpillar", "star"):
                    raise InvalidInput(f"unknown tree family {fam!r}")
            if p["nodes"] < 2 or p["seeds"] < 1 or p["budget"] < 1:
                raise InvalidInput("need nodes >= 2, seeds >= 1 and budget >= 1")
            if p["k"] is None:
                p["k"] = max(1, round(math.sqrt(p["nodes"])))
            if not 1 <= p["k"] <= p["nodes"]:
                raise InvalidInput("caterpillar k must lie in 1..nodes")
        elif self.name == "verify-bounds":
            if p["graphs"] < 1:
                raise InvalidInput("graphs must be >= 1")

    def header(self) -> list[str]:
        lines = [f"# experiment = {self.name}", f"# seed = {self.seed}"]
        for key in sorted(self.params):
            value = self.params[key]
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"# {key} = {value}")
        lines.append(f"# protocol = {SUBSTITUTIONS[self.name]}")
        return lines


def voting_convergence(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    prior_seed = cfg.seed if p["prior_seed"] is None else p["prior_seed"]
    rows = []
    for sem in p["semantics"]:
        g = build_voting_model(p["n"], sem, p["w"], prior_seed)
        curve = marginal_variance_experiment(g, 0, p["chains"], p["schedule"], cfg.seed)
        for s, v, est in zip(curve.steps, curve.variance, curve.estimates.mean(axis=0)):
            rows.append({"semantics": sem, "steps": int(s), "variance": float(v),
                         "mean_estimate": float(est)})
    return rows


def ising_hw(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    rows = []
    for w in p["weights"]:
        for fam in p["families"]:
            k = p["k"] if fam == "caterpillar" else None
            g, hw = build_tree_ising(p["nodes"], fam, k, w)
            q = max_degree_node(g)
            target = query_index(g, q, None)
            truth = exact_marginals_acyclic(g)[q][target]
            errs = np.empty(p["seeds"])
            for s in range(p["seeds"]):
                trace = run_chain(g, SamplerConfig(seed=cfg.seed, steps=p["budget"]), chain=s)
                errs[s] = (trace.counts[q][target] / trace.steps - truth) ** 2
            rows.append({"w": w, "family": fam, "k": "" if k is None else k, "hw": hw,
                         "query": g.variables[q].name, "truth": float(truth),
                         "mse": float(errs.mean()),
                         "mse_stderr": float(errs.std(ddof=1) / np.sqrt(len(errs)))
                         if len(errs) > 1 else 0.0})
    return rows


def verify_bounds(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    rows = []
    for i in range(p["graphs"]):
        g = random_factor_graph(make_rng(cfg.seed, i), max_vars=p["max_vars"],
                                max_factors=p["max_factors"], max_arity=p["max_arity"],
                                max_states=2, weight=p["weight"])
        for c in verify_lemmas(g, mixing=p["mixing"]):
            rows.append({"graph": i, "check": c.name, "detail": c.detail, "lhs": c.lhs,
                         "rhs": c.rhs, "passed": c.ok})
    return rows


RUNNERS = {"voting-convergence": voting_convergence, "ising-hw": ising_hw,
           "verify-bounds": verify_bounds}


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    return RUNNERS[cfg.name](cfg)


def to_csv(header: list[str], rows: list[dict], columns: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    columns = columns or (list(rows[0]) if rows else [])
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
