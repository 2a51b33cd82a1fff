"""Hierarchy checks and grounding of templates into factor graphs."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..errors import InvalidInput
from ..graph import SEMANTICS, AggregateFactor, FactorGraph, TableFactor, VariableSpec
from .schema import Dataset, Schema, TemplateFactor, TemplateSemanticError, inner_table


def hierarchy_depth(tf: TemplateFactor) -> int:
    """Largest d such that every term's first d argument symbols coincide."""
    if not tf.terms:
        return 0
    d = min(len(t.args) for t in tf.terms)
    first = tf.terms[0].args
    for i in range(d):
        if any(t.args[i] != first[i] for t in tf.terms):
            return i
    return d


def hierarchical_symbols(tf: TemplateFactor) -> tuple[str, ...]:
    return tf.terms[0].args[:hierarchy_depth(tf)] if tf.terms else ()


def is_hierarchical(item) -> bool:
    """A factor is hierarchical when its head symbols are all hierarchical
    symbols; a schema when all its factors are."""
    if isinstance(item, Schema):
        return all(is_hierarchical(tf) for tf in item.factors)
    return set(item.head_symbols) <= set(hierarchical_symbols(item))


def hierarchy_flags(schema: Schema) -> dict[str, bool]:
    return {tf.name: is_hierarchical(tf) for tf in schema.factors}


def _prefix_form(tf: TemplateFactor) -> bool:
    heads = tf.head_symbols
    return set(hierarchical_symbols(tf)[:len(heads)]) == set(heads)


def hw_template_bound(schema: Schema) -> int:
    """Number of template factors, a bound on the hierarchy width of every
    per-head grounding (logical, ratio, or linear via aggregates).

    The bound needs the head symbols to fill the leading argument positions
    of every term. A head symbol that is shared but sits behind a body
    symbol lets two template factors slice the same variables along
    different axes, and the grounding can then exceed the bound. Factors
    pinned to linear semantics are grounded per full assignment, so they
    must have no body symbols.
    """
    for tf in schema.factors:
        if not _prefix_form(tf):
            raise InvalidInput(f"template factor {tf.name!r} does not have its head symbols as a "
                               "common leading prefix of every term; the width bound does not apply")
        if tf.semantics == "linear" and tf.body_symbols:
            raise InvalidInput(f"template factor {tf.name!r} is pinned to linear semantics and has "
                               "body symbols; the width bound does not apply")
    return len(schema.factors)


@dataclass
class GroundingResult:
    graph: FactorGraph
    factor_provenance: list[tuple[str, tuple[str, ...], tuple[str, ...]]]   # (template, head, body)
    variable_provenance: list[tuple[str, tuple[str, ...]]]                 # (template var, objects)


def _validate_dataset(schema: Schema, ds: Dataset) -> None:
    for cls in ds.objects:
        if cls not in schema.classes:
            raise TemplateSemanticError("unknown-class", f"dataset uses undeclared class {cls!r}")
    for (tf_name, head), _ in ds.weights.items():
        tf = schema.factor(tf_name)
        if len(head) != len(tf.head_symbols):
            raise TemplateSemanticError("arity-mismatch",
                                        f"weight override for {tf_name!r} gives {len(head)} head "
                                        f"objects, factor has {len(tf.head_symbols)} head symbols")
        classes = schema.symbol_classes(tf)
        for sym, obj in zip(tf.head_symbols, head):
            if obj not in ds.objects.get(classes[sym], []):
                raise TemplateSemanticError("unknown-object", f"{obj!r} is not a {classes[sym]}")


def _reduce(table: np.ndarray, term_vars: list[int]) -> tuple[list[int], np.ndarray]:
    """Collapse repeated ground variables onto one axis (diagonal extraction)."""
    scope: list[int] = []
    for v in term_vars:
        if v not in scope:
            scope.append(v)
    if len(scope) == len(term_vars):
        return scope, table
    pos = {v: i for i, v in enumerate(scope)}
    shape = tuple(table.shape[term_vars.index(v)] for v in scope)
    idx = np.indices(shape)
    return scope, table[tuple(idx[pos[v]] for v in term_vars)]


def ground(schema: Schema, dataset: Dataset, semantics: str,
           linear_as_aggregate: bool = False) -> GroundingResult:
    """Instantiate ``schema`` on ``dataset``.

    Linear factors become one table per full symbol assignment, unless
    ``linear_as_aggregate`` is set, in which case they are grounded like
    the other semantics: one aggregate per head assignment. A head
    assignment with no body assignments contributes g(0) = 0 and is left out.
    """
    if semantics not in SEMANTICS:
        raise InvalidInput(f"unknown semantics {semantics!r}")
    _validate_dataset(schema, dataset)
    objects = dataset.objects

    variables: list[VariableSpec] = []
    var_prov: list[tuple[str, tuple[str, ...]]] = []
    index: dict[tuple[str, tuple[str, ...]], int] = {}
    for tv in schema.variables:
        for objs in product(*(objects.get(c, []) for c in tv.classes)):
            key = (tv.name, tuple(objs))
            index[key] = len(variables)
            label = tv.name if not objs else f"{tv.name}({','.join(objs)})"
            variables.append(VariableSpec(len(variables), label, tv.domain))
            var_prov.append(key)

    factors = []
    fprov = []
    for tf in schema.factors:
        sem = tf.semantics or semantics
        classes = schema.symbol_classes(tf)
        heads, body = tf.head_symbols, tf.body_symbols
        table = inner_table(schema, tf)
        head_sets = [objects.get(classes[s], []) for s in heads]
        body_sets = [objects.get(classes[s], []) for s in body]

        def term_table(assign):
            ids = [index[(t.variable, tuple(assign[a] for a in t.args))] for t in tf.terms]
            return _reduce(table, ids)

        per_assignment = sem == "linear" and not linear_as_aggregate
        for h in product(*head_sets):
            w = dataset.weights.get((tf.name, tuple(h)), tf.weight)
            assign = dict(zip(heads, h))
            tag = ",".join(h)
            terms = []
            for b in product(*body_sets):
                assign.update(zip(body, b))
                scope, tab = term_table(assign)
                if per_assignment:
                    full = ",".join(assign[s] for s in tf.symbols)
                    factors.append(TableFactor(scope, w * tab + 0.0, f"{tf.name}({full})"))
                    fprov.append((tf.name, tuple(h), tuple(b)))
                else:
                    terms.append(TableFactor(scope, tab, f"{tf.name}[{','.join(b)}]"))
            if terms:
                factors.append(AggregateFactor(w, sem, terms, f"{tf.name}({tag})"))
                fprov.append((tf.name, tuple(h), ()))

    evidence = {}
    for var, args, value in dataset.evidence:
        key = (var, tuple(args))
        if key not in index:
            raise TemplateSemanticError("unknown-evidence", f"{var}({','.join(args)}) is not a ground variable")
        try:
            evidence[index[key]] = variables[index[key]].index_of(value)
        except InvalidInput:
            raise TemplateSemanticError("bad-evidence",
                                        f"{value} is not in the domain of {var}") from None
    graph = FactorGraph(variables, factors, evidence)
    return GroundingResult(graph, fprov, var_prov)
