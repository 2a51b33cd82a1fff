"""Line-oriented text format for factor graphs.

::

    fg 1
    # comment
    var Q 2 -1 1
    var T1 2 0 1
    table prior_T1 T1 : 0 -0.3
    agg phi_T logical 0.5 {
      table t1 Q T1 : 0 -1 0 1
    }
    evidence T1 1

Tables are row-major over the listed variables' domains. ``evidence`` takes a
value label, not a domain index. Reals go through ``float`` (round to nearest)
and are written with ``repr`` so a write/read cycle is bit-exact.
"""
from __future__ import annotations

from .errors import InvalidInput
from .graph import SEMANTICS, AggregateFactor, FactorGraph, TableFactor, VariableSpec


class FormatError(InvalidInput):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _parse_table(tokens, lineno, names, variables) -> TableFactor:
    if len(tokens) < 3 or ":" not in tokens:
        raise FormatError(lineno, "expected 'table <name> <var>... : <reals>'")
    colon = tokens.index(":")
    fname = tokens[1]
    scope = []
    for name in tokens[2:colon]:
        if name not in names:
            raise FormatError(lineno, f"unknown variable {name!r}")
        scope.append(names[name])
    try:
        values = [float(x) for x in tokens[colon + 1:]]
    except ValueError as exc:
        raise FormatError(lineno, f"bad real: {exc}") from None
    expected = 1
    for v in scope:
        expected *= variables[v].domain_size
    if len(values) != expected:
        raise FormatError(lineno, f"table {fname!r} has {len(values)} values, expected {expected}")
    try:
        return TableFactor(scope, values, fname)
    except InvalidInput as exc:
        raise FormatError(lineno, str(exc)) from None


def parse_fg(text: str) -> FactorGraph:
    lines = text.splitlines()
    variables: list[VariableSpec] = []
    names: dict[str, int] = {}
    factors = []
    evidence = {}
    seen_header = False
    agg = None  # (name, semantics, weight, terms, lineno)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if not seen_header:
            if tokens != ["fg", "1"]:
                raise FormatError(lineno, "missing 'fg 1' header")
            seen_header = True
            continue
        head = tokens[0]
        if agg is not None:
            if head == "}":
                name, sem, weight, terms, _ = agg
                try:
                    factors.append(AggregateFactor(weight, sem, terms, name))
                except InvalidInput as exc:
                    raise FormatError(lineno, str(exc)) from None
                agg = None
            elif head == "table":
                agg[3].append(_parse_table(tokens, lineno, names, variables))
            else:
                raise FormatError(lineno, f"unexpected {head!r} inside agg block")
            continue
        if head == "var":
            if len(tokens) < 3:
                raise FormatError(lineno, "expected 'var <name> <k> <v0> ...'")
            name = tokens[1]
            if name in names:
                raise FormatError(lineno, f"duplicate variable {name!r}")
            try:
                k = int(tokens[2])
                labels = tuple(int(x) for x in tokens[3:])
            except ValueError:
                raise FormatError(lineno, "variable domain must be integers") from None
            if len(labels) != k:
                raise FormatError(lineno, f"variable {name!r} declares {k} values, lists {len(labels)}")
            try:
                variables.append(VariableSpec(len(variables), name, labels))
            except InvalidInput as exc:
                raise FormatError(lineno, str(exc)) from None
            names[name] = len(variables) - 1
        elif head == "table":
            factors.append(_parse_table(tokens, lineno, names, variables))
        elif head == "agg":
            if len(tokens) != 5 or tokens[4] != "{":
                raise FormatError(lineno, "expected 'agg <name> <semantics> <weight> {'")
            if tokens[2] not in SEMANTICS:
                raise FormatError(lineno, f"unknown semantics {tokens[2]!r}")
            try:
                weight = float(tokens[3])
            except ValueError:
                raise FormatError(lineno, f"bad weight {tokens[3]!r}") from None
            agg = (tokens[1], tokens[2], weight, [], lineno)
        elif head == "evidence":
            if len(tokens) != 3 or tokens[1] not in names:
                raise FormatError(lineno, "expected 'evidence <var> <value>'")
            v = names[tokens[1]]
            try:
                evidence[v] = variables[v].index_of(int(tokens[2]))
            except (ValueError, InvalidInput) as exc:
                raise FormatError(lineno, str(exc)) from None
        else:
            raise FormatError(lineno, f"unknown directive {head!r}")
    if not seen_header:
        raise FormatError(0, "empty input")
    if agg is not None:
        raise FormatError(agg[4], "unterminated agg block")
    try:
        return FactorGraph(variables, factors, evidence)
    except InvalidInput as exc:
        raise FormatError(len(lines), str(exc)) from None


def _fmt(x: float) -> str:
    return repr(float(x))


def _table_line(graph: FactorGraph, factor: TableFactor, fallback: str) -> str:
    names = " ".join(graph.variables[v].name for v in factor.scope)
    values = " ".join(_fmt(x) for x in factor.table)
    sep = f"{names} : " if names else ": "
    return f"table {factor.name or fallback} {sep}{values}"


def format_fg(graph: FactorGraph) -> str:
    out = ["fg 1"]
    for var in graph.variables:
        out.append(f"var {var.name} {var.domain_size} " + " ".join(str(x) for x in var.domain))
    for i, factor in enumerate(graph.factors):
        if isinstance(factor, TableFactor):
            out.append(_table_line(graph, factor, f"f{i}"))
        else:
            out.append(f"agg {factor.name or f'f{i}'} {factor.semantics} {_fmt(factor.weight)} {{")
            for j, term in enumerate(factor.terms):
                out.append("  " + _table_line(graph, term, f"t{j}"))
            out.append("}")
    for v, x in sorted(graph.evidence.items()):
        out.append(f"evidence {graph.variables[v].name} {graph.variables[v].domain[x]}")
    return "\n".join(out) + "\n"


def read_fg(path) -> FactorGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_fg(fh.read())


def write_fg(graph: FactorGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_fg(graph))
