"""Template schemas, datasets, and their line-oriented text format.

Schema file::

    class Voter
    tvar Q() domain 2 -1 1
    tvar T(Voter) domain 2 0 1
    tfactor vote_T(x) weight 0.5 semantics default : Q() T(x) table 0 -1 0 1
    tfactor prior_T(x^) weight 0 semantics linear : T(x) table 0 1

``^`` marks a head symbol. ``semantics default`` defers to the semantics
passed to ``ground``; any other value pins the factor. The table is
row-major over the terms' joint values.

Dataset file::

    object Voter v1
    evidence T(v1) = 1
    weight prior_T (v1) = -0.3
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput
from ..graph import SEMANTICS

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TOKEN = re.compile(r"\s*(?:([(),^:=])|([^\s(),^:=#]+))")


class TemplateSyntaxError(InvalidInput):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: syntax error: {message}")
        self.line, self.col = line, col


class TemplateSemanticError(InvalidInput):
    """Well-formed text that violates a schema rule; ``code`` names the rule."""

    def __init__(self, code: str, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{code}: {message}")
        self.code, self.line = code, line


@dataclass(frozen=True)
class TemplateVariable:
    name: str
    classes: tuple[str, ...]
    domain: tuple[int, ...]


@dataclass(frozen=True)
class Term:
    variable: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class TemplateFactor:
    name: str
    symbols: tuple[str, ...]
    heads: tuple[bool, ...]
    weight: float
    terms: tuple[Term, ...]
    table: tuple[float, ...]
    semantics: str | None = None     # None: use the grounding's semantics

    @property
    def head_symbols(self) -> tuple[str, ...]:
        return tuple(s for s, h in zip(self.symbols, self.heads) if h)

    @property
    def body_symbols(self) -> tuple[str, ...]:
        return tuple(s for s, h in zip(self.symbols, self.heads) if not h)


@dataclass(frozen=True)
class Schema:
    classes: tuple[str, ...]
    variables: tuple[TemplateVariable, ...]
    factors: tuple[TemplateFactor, ...]

    def variable(self, name: str) -> TemplateVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise TemplateSemanticError("unknown-variable", f"no template variable {name!r}")

    def factor(self, name: str) -> TemplateFactor:
        for f in self.factors:
            if f.name == name:
                return f
        raise TemplateSemanticError("unknown-factor", f"no template factor {name!r}")

    def symbol_classes(self, tf: TemplateFactor) -> dict[str, str]:
        out: dict[str, str] = {}
        for term in tf.terms:
            for sym, cls in zip(term.args, self.variable(term.variable).classes):
                out[sym] = cls
        return out


@dataclass
class Dataset:
    objects: dict[str, list[str]] = field(default_factory=dict)
    evidence: list[tuple[str, tuple[str, ...], int]] = field(default_factory=list)
    weights: dict[tuple[str, tuple[str, ...]], float] = field(default_factory=dict)


class _Cursor:
    def __init__(self, text: str, line: int):
        self.line = line
        self.toks: list[tuple[str, int]] = []
        pos = 0
        text = text.split("#", 1)[0].rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise TemplateSyntaxError(line, pos + 1, f"unexpected character {text[pos]!r}")
            tok = m.group(1) or m.group(2)
            self.toks.append((tok, m.start(m.lastindex) + 1))
            pos = m.end()
        self.i = 0
        self.end_col = len(text) + 1

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def col(self) -> int:
        return self.toks[self.i][1] if self.i < len(self.toks) else self.end_col

    def next(self, what: str) -> str:
        if self.i >= len(self.toks):
            raise TemplateSyntaxError(self.line, self.end_col, f"expected {what}, found end of line")
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        col = self.col()
        got = self.next(repr(tok))
        if got != tok:
            raise TemplateSyntaxError(self.line, col, f"expected {tok!r}, found {got!r}")

    def ident(self, what: str) -> str:
        col = self.col()
        tok = self.next(what)
        if not _IDENT.match(tok):
            raise TemplateSyntaxError(self.line, col, f"expected {what}, found {tok!r}")
        return tok

    def word(self, what: str) -> str:
        col = self.col()
        tok = self.next(what)
        if tok in "(),^:=":
            raise TemplateSyntaxError(self.line, col, f"expected {what}, found {tok!r}")
        return tok

    def real(self, what: str = "a real number") -> float:
        col = self.col()
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise TemplateSyntaxError(self.line, col, f"expected {what}, found {tok!r}") from None

    def integer(self, what: str = "an integer") -> int:
        col = self.col()
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise TemplateSyntaxError(self.line, col, f"expected {what}, found {tok!r}") from None

    def arglist(self, what: str, allow_head: bool = False, ident: bool = True):
        self.expect("(")
        items: list[tuple[str, bool]] = []
        if self.peek() == ")":
            self.next(")")
            return items
        while True:
            name = self.ident(what) if ident else self.word(what)
            head = False
            if self.peek() == "^":
                if not allow_head:
                    raise TemplateSyntaxError(self.line, self.col(), "head flag '^' is only allowed "
                                              "in a template factor header")
                self.next("^")
                head = True
            items.append((name, head))
            col = self.col()
            tok = self.next("',' or ')'")
            if tok == ")":
                return items
            if tok != ",":
                raise TemplateSyntaxError(self.line, col, f"expected ',' or ')', found {tok!r}")

    def done(self) -> None:
        if self.i < len(self.toks):
            tok, col = self.toks[self.i]
            raise TemplateSyntaxError(self.line, col, f"unexpected trailing {tok!r}")


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cur = _Cursor(raw, lineno)
        if cur.toks:
            yield lineno, cur


def parse_template(text: str) -> Schema:
    classes: list[str] = []
    variables: dict[str, TemplateVariable] = {}
    factors: list[TemplateFactor] = []
    factor_names: set[str] = set()
    for lineno, cur in _lines(text):
        kw = cur.ident("a directive")
        if kw == "class":
            name = cur.ident("a class name")
            cur.done()
            if name in classes:
                raise TemplateSemanticError("duplicate-name", f"class {name!r} declared twice", lineno)
            classes.append(name)
        elif kw == "tvar":
            name = cur.ident("a variable name")
            args = [a for a, _ in cur.arglist("a class name")]
            cur.expect("domain")
            k = cur.integer("a domain size")
            domain = tuple(cur.integer("a domain value") for _ in range(k))
            cur.done()
            if name in variables:
                raise TemplateSemanticError("duplicate-name", f"template variable {name!r} declared twice", lineno)
            for c in args:
                if c not in classes:
                    raise TemplateSemanticError("unknown-class", f"class {c!r} is not declared", lineno)
            if k < 2 or len(set(domain)) != k:
                raise TemplateSemanticError("bad-domain", f"{name!r} needs at least two distinct values", lineno)
            variables[name] = TemplateVariable(name, tuple(args), domain)
        elif kw == "tfactor":
            tf = _parse_tfactor(cur, lineno)
            if tf.name in factor_names:
                raise TemplateSemanticError("duplicate-name", f"template factor {tf.name!r} declared twice", lineno)
            _check_tfactor(tf, variables, lineno)
            factor_names.add(tf.name)
            factors.append(tf)
        else:
            raise TemplateSyntaxError(lineno, 1, f"unknown directive {kw!r}")
    return Schema(tuple(classes), tuple(variables.values()), tuple(factors))


def _parse_tfactor(cur: _Cursor, lineno: int) -> TemplateFactor:
    name = cur.ident("a factor name")
    syms = cur.arglist("a symbol", allow_head=True)
    cur.expect("weight")
    weight = cur.real("a weight")
    semantics = None
    if cur.peek() == "semantics":
        cur.next("semantics")
        col = cur.col()
        sem = cur.ident("a semantics name")
        if sem != "default" and sem not in SEMANTICS:
            raise TemplateSemanticError("unknown-semantics", f"{sem!r} (column {col})", lineno)
        semantics = None if sem == "default" else sem
    cur.expect(":")
    terms = []
    while cur.peek() is not None and cur.peek() != "table":
        var = cur.ident("a term or 'table'")
        terms.append(Term(var, tuple(a for a, _ in cur.arglist("a symbol"))))
    cur.expect("table")
    table = []
    while cur.peek() is not None:
        table.append(cur.real())
    return TemplateFactor(name, tuple(s for s, _ in syms), tuple(h for _, h in syms),
                          weight, tuple(terms), tuple(table), semantics)


def _check_tfactor(tf: TemplateFactor, variables: dict[str, TemplateVariable], lineno: int) -> None:
    if len(set(tf.symbols)) != len(tf.symbols):
        raise TemplateSemanticError("duplicate-symbol", f"{tf.name!r} repeats a symbol", lineno)
    if not tf.terms:
        raise TemplateSemanticError("no-terms", f"{tf.name!r} has no terms", lineno)
    classes: dict[str, str] = {}
    size = 1
    for term in tf.terms:
        if term.variable not in variables:
            raise TemplateSemanticError("unknown-variable", f"{term.variable!r} in {tf.name!r}", lineno)
        tv = variables[term.variable]
        if len(term.args) != len(tv.classes):
            raise TemplateSemanticError(
                "arity-mismatch",
                f"{term.variable} takes {len(tv.classes)} arguments, {tf.name!r} gives {len(term.args)}",
                lineno)
        for sym, cls in zip(term.args, tv.classes):
            if sym not in tf.symbols:
                raise TemplateSemanticError("undeclared-symbol",
                                            f"{sym!r} is used in {tf.name!r} but not declared", lineno)
            if classes.setdefault(sym, cls) != cls:
                raise TemplateSemanticError("class-mismatch",
                                            f"{sym!r} is used as {classes[sym]} and {cls}", lineno)
        size *= len(tv.domain)
    for sym in tf.symbols:
        if sym not in classes:
            raise TemplateSemanticError("unused-symbol", f"{sym!r} is declared in {tf.name!r} "
                                        "but appears in no term", lineno)
    if len(tf.table) != size:
        raise TemplateSemanticError("table-size",
                                    f"{tf.name!r} table has {len(tf.table)} values, expected {size}", lineno)


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_template(schema: Schema) -> str:
    out = [f"class {c}" for c in schema.classes]
    for v in schema.variables:
        out.append(f"tvar {v.name}({','.join(v.classes)}) domain {len(v.domain)} "
                   + " ".join(str(x) for x in v.domain))
    for tf in schema.factors:
        syms = ",".join(s + ("^" if h else "") for s, h in zip(tf.symbols, tf.heads))
        terms = " ".join(f"{t.variable}({','.join(t.args)})" for t in tf.terms)
        out.append(f"tfactor {tf.name}({syms}) weight {_fmt(tf.weight)} semantics "
                   f"{tf.semantics or 'default'} : {terms} table "
                   + " ".join(_fmt(x) for x in tf.table))
    return "\n".join(out) + "\n"


def parse_dataset(text: str) -> Dataset:
    ds = Dataset()
    for lineno, cur in _lines(text):
        kw = cur.ident("a directive")
        if kw == "object":
            cls = cur.ident("a class name")
            name = cur.word("an object name")
            cur.done()
            objs = ds.objects.setdefault(cls, [])
            if name in objs:
                raise TemplateSemanticError("duplicate-object", f"{name!r} listed twice in {cls}", lineno)
            objs.append(name)
        elif kw == "evidence":
            var = cur.ident("a template variable")
            args = tuple(a for a, _ in cur.arglist("an object", ident=False))
            cur.expect("=")
            value = cur.integer("a domain value")
            cur.done()
            ds.evidence.append((var, args, value))
        elif kw == "weight":
            tf = cur.ident("a template factor")
            head = tuple(a for a, _ in cur.arglist("an object", ident=False))
            cur.expect("=")
            w = cur.real("a weight")
            cur.done()
            ds.weights[(tf, head)] = w
        else:
            raise TemplateSyntaxError(lineno, 1, f"unknown directive {kw!r}")
    return ds


def serialize_dataset(ds: Dataset) -> str:
    out = []
    for cls, objs in ds.objects.items():
        out += [f"object {cls} {o}" for o in objs]
    out += [f"evidence {v}({','.join(a)}) = {x}" for v, a, x in ds.evidence]
    out += [f"weight {tf} ({','.join(h)}) = {_fmt(w)}" for (tf, h), w in ds.weights.items()]
    return "\n".join(out) + ("\n" if out else "")


def read_template(path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return parse_template(fh.read())


def read_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read())


def inner_table(schema: Schema, tf: TemplateFactor) -> np.ndarray:
    shape = tuple(len(schema.variable(t.variable).domain) for t in tf.terms)
    return np.asarray(tf.table, dtype=float).reshape(shape)
