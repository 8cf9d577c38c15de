"""Parser for the mapping DSL.

Statements end with a period:

    source R/2, P/1.
    target S/2.
    tgd: R(x,y) & x < y -> exists z: S(x,z) & S(y,z).

Operators `&`, `|`, `!`, `exists v:`, `forall v:`, `=`, `<` and
parentheses; variables are lowercase identifiers, constants are
single-quoted.  Quantifier bodies extend as far right as possible.
`certain[...]` occurs only in printed output and is rejected here.
"""

from __future__ import annotations

import re

from dx.lang import (
    And,
    Eq,
    Exists,
    Forall,
    Formula,
    Lt,
    Not,
    Or,
    RelAtom,
    SchemaMapping,
    TGD,
    TrueF,
    Var,
)
from dx.model import Const, MappingError, ParseError, Schema

_KEYWORDS = {"source", "target", "tgd", "exists", "forall", "true", "certain"}

_TOKEN = re.compile(
    r"""(?P<ws>\s+|\#[^\n]*)
       |(?P<arrow>->)
       |(?P<punct>[().,:/&|!=<\[\]])
       |(?P<ident>[A-Za-z_][A-Za-z0-9_]*)
       |(?P<number>[0-9]+)
       |(?P<quoted>'(?:[^'\\]|\\.)*')
    """,
    re.VERBOSE,
)


class _Lexer:
    def __init__(self, text: str):
        self.tokens = []
        line, col, pos = 1, 1, 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", line, col)
            kind = m.lastgroup
            tok = m.group(0)
            if kind != "ws":
                self.tokens.append((kind, tok, line, col))
            for ch in tok:
                if ch == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is not None:
            self.i += 1
        return tok

    def error(self, msg):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else (None, "", 1, 1)
            raise ParseError(f"{msg} at end of input", last[2], last[3])
        raise ParseError(f"{msg}, got {tok[1]!r}", tok[2], tok[3])

    def expect(self, value):
        tok = self.peek()
        if tok is None or tok[1] != value:
            self.error(f"expected {value!r}")
        return self.next()

    def accept(self, value):
        tok = self.peek()
        if tok is not None and tok[1] == value:
            self.next()
            return True
        return False


class _FormulaParser:
    def __init__(self, lex: _Lexer, schema_lookup):
        self.lex = lex
        self.schema_lookup = schema_lookup  # rel name -> arity, raises on unknown

    def formula(self) -> Formula:
        tok = self.lex.peek()
        if tok and tok[1] in ("exists", "forall"):
            return self.quantified()
        return self.disjunction()

    def quantified(self) -> Formula:
        kw = self.lex.next()[1]
        names = [self._var_name()]
        while self.lex.accept(","):
            names.append(self._var_name())
        self.lex.expect(":")
        body = self.formula()
        node = Exists if kw == "exists" else Forall
        for name in reversed(names):
            body = node(name, body)
        return body

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.lex.accept("|"):
            tok = self.lex.peek()
            if tok and tok[1] in ("exists", "forall"):
                parts.append(self.quantified())
                break
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.lex.accept("&"):
            tok = self.lex.peek()
            if tok and tok[1] in ("exists", "forall"):
                parts.append(self.quantified())
                break
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        tok = self.lex.peek()
        if tok is None:
            self.lex.error("expected a formula")
        if tok[1] == "!":
            self.lex.next()
            return Not(self.unary())
        if tok[1] == "(":
            self.lex.next()
            inner = self.formula()
            self.lex.expect(")")
            return inner
        if tok[1] in ("exists", "forall"):
            return self.quantified()
        if tok[1] == "true":
            self.lex.next()
            return TrueF()
        if tok[1] == "certain":
            raise ParseError(
                "certain[...] cannot be parsed back; regenerate the mapping "
                "with certain answers eliminated",
                tok[2],
                tok[3],
            )
        return self.atom()

    def _var_name(self) -> str:
        tok = self.lex.peek()
        if tok is None or tok[0] != "ident" or tok[1] in _KEYWORDS:
            self.lex.error("expected a variable name")
        if not tok[1][0].islower():
            self.lex.error("variables must start with a lowercase letter")
        return self.lex.next()[1]

    def term(self):
        tok = self.lex.peek()
        if tok is None:
            self.lex.error("expected a term")
        if tok[0] == "quoted":
            self.lex.next()
            body = tok[1][1:-1].replace("\\'", "'").replace("\\\\", "\\")
            if not body:
                raise ParseError("empty constant", tok[2], tok[3])
            try:
                return Const(body)
            except ValueError as exc:
                raise ParseError(str(exc), tok[2], tok[3]) from None
        if tok[0] == "ident" and tok[1] not in _KEYWORDS:
            if not tok[1][0].islower():
                self.lex.error(
                    "expected a variable (lowercase) or quoted constant"
                )
            self.lex.next()
            return Var(tok[1])
        self.lex.error("expected a term")

    def atom(self) -> Formula:
        tok = self.lex.peek()
        if tok is None:
            self.lex.error("expected an atom")
        if tok[0] == "ident" and tok[1] not in _KEYWORDS:
            nxt = self.lex.tokens[self.lex.i + 1] if self.lex.i + 1 < len(self.lex.tokens) else None
            if nxt and nxt[1] == "(":
                rel_tok = self.lex.next()
                self.lex.expect("(")
                args = []
                if not self.lex.accept(")"):
                    args.append(self.term())
                    while self.lex.accept(","):
                        args.append(self.term())
                    self.lex.expect(")")
                arity = self.schema_lookup(rel_tok[1], rel_tok[2], rel_tok[3])
                if arity != len(args):
                    raise ParseError(
                        f"arity mismatch for {rel_tok[1]}: declared /{arity}, "
                        f"used with {len(args)} arguments",
                        rel_tok[2],
                        rel_tok[3],
                    )
                return RelAtom(rel_tok[1], tuple(args))
        left = self.term()
        op = self.lex.peek()
        if op is None or op[1] not in ("=", "<"):
            self.lex.error("expected '=' or '<'")
        self.lex.next()
        right = self.term()
        return Eq(left, right) if op[1] == "=" else Lt(left, right)


def _parse_decls(lex: _Lexer):
    rels = {}
    while True:
        tok = lex.peek()
        if tok is None or tok[0] != "ident" or tok[1] in _KEYWORDS:
            lex.error("expected a relation declaration like R/2")
        name = lex.next()[1]
        lex.expect("/")
        num = lex.peek()
        if num is None or num[0] != "number":
            lex.error("expected an arity")
        lex.next()
        if name in rels:
            raise ParseError(f"relation {name} declared twice", tok[2], tok[3])
        rels[name] = int(num[1])
        if lex.accept(","):
            continue
        lex.expect(".")
        return rels


def parse_mapping(text: str) -> SchemaMapping:
    """Parse the mapping DSL into a schema mapping."""
    lex = _Lexer(text)
    source: dict = {}
    target: dict = {}
    tgds = []

    def lookup(rel, line, col):
        if rel in source:
            return source[rel]
        if rel in target:
            return target[rel]
        raise ParseError(f"undeclared relation {rel}", line, col)

    while True:
        tok = lex.peek()
        if tok is None:
            break
        if tok[1] == "source":
            lex.next()
            source.update(_parse_decls(lex))
        elif tok[1] == "target":
            lex.next()
            target.update(_parse_decls(lex))
        elif tok[1] == "tgd":
            lex.next()
            lex.expect(":")
            parser = _FormulaParser(lex, lookup)
            antecedent = parser.formula()
            lex.expect("->")
            exist_vars: list = []
            nxt = lex.peek()
            if nxt and nxt[1] == "exists":
                lex.next()
                exist_vars.append(parser._var_name())
                while lex.accept(","):
                    exist_vars.append(parser._var_name())
                lex.expect(":")
            atoms = [parser.atom()]
            while lex.accept("&"):
                atoms.append(parser.atom())
            lex.expect(".")
            for a in atoms:
                if not isinstance(a, RelAtom):
                    raise ParseError(
                        "dependency consequents must be conjunctions of "
                        "relational atoms",
                        tok[2],
                        tok[3],
                    )
                if a.rel not in target:
                    raise ParseError(
                        f"consequent relation {a.rel} is not a target relation",
                        tok[2],
                        tok[3],
                    )
            used = {v.name for a in atoms for v in a.args if isinstance(v, Var)}
            for rel_atom in _rel_atoms(antecedent):
                if rel_atom.rel in target:
                    raise ParseError(
                        f"antecedent uses target relation {rel_atom.rel}",
                        tok[2],
                        tok[3],
                    )
            try:
                tgds.append(
                    TGD(antecedent, tuple(v for v in exist_vars if v in used), tuple(atoms))
                )
            except MappingError as exc:
                raise ParseError(str(exc), tok[2], tok[3]) from None
        else:
            lex.error("expected 'source', 'target' or 'tgd'")
    try:
        return SchemaMapping(Schema(source), Schema(target), tuple(tgds))
    except MappingError as exc:
        raise ParseError(str(exc)) from None


def _rel_atoms(f: Formula):
    if isinstance(f, RelAtom):
        yield f
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from _rel_atoms(p)
    elif isinstance(f, (Not, Exists, Forall)):
        yield from _rel_atoms(f.body)


def parse_formula(text: str, schema: Schema) -> Formula:
    """Parse a standalone formula against one schema (used for queries)."""
    lex = _Lexer(text)

    def lookup(rel, line, col):
        if rel in schema:
            return schema.arity(rel)
        raise ParseError(f"undeclared relation {rel}", line, col)

    parser = _FormulaParser(lex, lookup)
    f = parser.formula()
    if lex.peek() is not None:
        lex.error("trailing input after formula")
    return f
