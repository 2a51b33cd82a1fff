"""Gibbs sampling on discrete factor graphs with hierarchy-width analysis."""
from .errors import HwGibbsError, InvalidInput, ResourceLimit, UnsupportedStructure
from .fgio import format_fg, parse_fg, read_fg, write_fg
from .graph import AggregateFactor, FactorGraph, TableFactor, VariableSpec
from .inference import energy, exact_joint, exact_marginals_acyclic
from .rng import make_rng
from .sampler import (SamplerConfig, coupled_step, gibbs_step, marginal_variance_experiment,
                      run_chain, tv_bound_from_coupling)
from .spectral import (absolute_spectral_gap, exact_mixing_time, mixing_time, relaxation_bound,
                       theorem2_bound, transition_matrix, verify_lemmas)
from .width import (hierarchy_decomposition, hierarchy_width, hw_at_most_k,
                    tree_depth_of_line_graph, validate_decomposition, width_report)

__all__ = [
    "AggregateFactor", "FactorGraph", "HwGibbsError", "InvalidInput", "ResourceLimit",
    "SamplerConfig", "TableFactor", "UnsupportedStructure", "VariableSpec",
    "absolute_spectral_gap", "coupled_step", "energy", "exact_joint", "exact_marginals_acyclic",
    "exact_mixing_time", "format_fg", "gibbs_step", "hierarchy_decomposition",
    "hierarchy_width", "hw_at_most_k", "make_rng", "marginal_variance_experiment",
    "mixing_time", "parse_fg", "read_fg", "relaxation_bound", "run_chain", "theorem2_bound",
    "transition_matrix", "tree_depth_of_line_graph", "tv_bound_from_coupling",
    "validate_decomposition", "verify_lemmas", "width_report", "write_fg",
]
