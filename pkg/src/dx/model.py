"""Values, facts, instances, fact blocks, homomorphisms, cores, isomorphism.

Constants carry a total order (byte-wise lexicographic on their UTF-8
text, which coincides with Python's str ordering and with SQLite's
binary collation).  Labeled nulls are either numbered ("fresh") or
Skolem terms over values.  Everything here is immutable and hashable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Union

from dx import kernel

RESERVED_PREFIX = "@"


class DxError(Exception):
    """Base class for engine errors."""


class ParseError(DxError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)


class MappingError(DxError):
    """Semantic problem in a schema, mapping, or formula."""


@dataclass(frozen=True, slots=True)
class Const:
    """A constant value; ordered by its text."""

    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("constant text must be nonempty")
        if self.text.startswith(RESERVED_PREFIX):
            raise ValueError(f"constant text may not start with {RESERVED_PREFIX!r}")

    def __repr__(self):
        return f"Const({self.text!r})"


@dataclass(frozen=True, slots=True)
class FreshNull:
    """A labeled null with a numeric label."""

    id: int

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError("fresh null id must be positive")

    def __repr__(self):
        return f"FreshNull({self.id})"


@dataclass(frozen=True, slots=True)
class SkolemNull:
    """A labeled null that is a term: a function symbol applied to values."""

    symbol: str
    args: tuple

    def __repr__(self):
        return f"SkolemNull({self.symbol!r}, {self.args!r})"


Value = Union[Const, FreshNull, SkolemNull]


def is_null(v: Value) -> bool:
    return not isinstance(v, Const)


def value_key(v: Value):
    """Total order over all values: constants first, then nulls."""
    if isinstance(v, Const):
        return ("a", v.text)
    if isinstance(v, FreshNull):
        return ("b", v.id)
    return ("c", v.symbol, tuple(value_key(a) for a in v.args))


@dataclass(frozen=True, slots=True)
class Fact:
    rel: str
    args: tuple


def fact_key(f: Fact):
    return (f.rel, tuple(value_key(a) for a in f.args))


class Schema:
    """Relation symbols with arities."""

    __slots__ = ("rels", "_arity")

    def __init__(self, rels: Mapping[str, int] | Iterable[tuple[str, int]]):
        items = sorted(dict(rels).items())
        for name, ar in items:
            if not name:
                raise MappingError("relation name must be nonempty")
            if ar < 0:
                raise MappingError(f"negative arity for relation {name}")
        object.__setattr__(self, "rels", tuple(items))
        object.__setattr__(self, "_arity", dict(items))

    def __setattr__(self, name, value):
        raise AttributeError("Schema is immutable")

    def arity(self, name: str) -> int:
        try:
            return self._arity[name]
        except KeyError:
            raise MappingError(f"undeclared relation: {name}") from None

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.rels)

    def __contains__(self, name: str) -> bool:
        return name in self._arity

    def __eq__(self, other):
        return isinstance(other, Schema) and self.rels == other.rels

    def __hash__(self):
        return hash(self.rels)

    def __repr__(self):
        body = ", ".join(f"{n}/{a}" for n, a in self.rels)
        return f"Schema({body})"


class Instance:
    """A finite set of facts over a schema.  Immutable."""

    __slots__ = ("schema", "facts", "__dict__")

    def __init__(self, schema: Schema, facts: Iterable[Fact]):
        fs = frozenset(facts)
        for f in fs:
            if f.rel not in schema:
                raise MappingError(f"fact over undeclared relation {f.rel}")
            if len(f.args) != schema.arity(f.rel):
                raise MappingError(
                    f"arity mismatch: {f.rel} declared /{schema.arity(f.rel)}, "
                    f"fact has {len(f.args)} arguments"
                )
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "facts", fs)

    def __setattr__(self, name, value):
        raise AttributeError("Instance is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.schema == other.schema
            and self.facts == other.facts
        )

    def __hash__(self):
        return hash((self.schema, self.facts))

    def __len__(self):
        return len(self.facts)

    def __iter__(self) -> Iterator[Fact]:
        return iter(self.facts_sorted)

    def __repr__(self):
        return f"Instance({len(self.facts)} facts)"

    @cached_property
    def facts_sorted(self) -> tuple:
        return tuple(sorted(self.facts, key=fact_key))

    @cached_property
    def dom(self) -> tuple:
        vals = {a for f in self.facts for a in f.args}
        return tuple(sorted(vals, key=value_key))

    @cached_property
    def nulls(self) -> tuple:
        return tuple(v for v in self.dom if is_null(v))

    @cached_property
    def constants(self) -> tuple:
        return tuple(v for v in self.dom if not is_null(v))

    @cached_property
    def by_rel(self) -> dict:
        out: dict[str, list] = {}
        for f in self.facts_sorted:
            out.setdefault(f.rel, []).append(f.args)
        return out

    @property
    def is_source(self) -> bool:
        return not self.nulls

    def with_facts(self, facts: Iterable[Fact]) -> "Instance":
        return Instance(self.schema, self.facts | frozenset(facts))

    def without(self, facts: Iterable[Fact]) -> "Instance":
        return Instance(self.schema, self.facts - frozenset(facts))


@dataclass(frozen=True)
class FactGraph:
    """Facts as nodes; an edge joins two facts sharing a null."""

    nodes: tuple
    edges: tuple


def fact_graph(inst: Instance) -> FactGraph:
    nodes = inst.facts_sorted
    by_null: dict = {}
    for f in nodes:
        for a in f.args:
            if is_null(a):
                by_null.setdefault(a, []).append(f)
    edges = set()
    for facts in by_null.values():
        for i in range(len(facts)):
            for j in range(i + 1, len(facts)):
                a, b = sorted((facts[i], facts[j]), key=fact_key)
                if a != b:
                    edges.add((a, b))
    return FactGraph(nodes, tuple(sorted(edges, key=lambda e: (fact_key(e[0]), fact_key(e[1])))))


def blocks(inst: Instance) -> list[Instance]:
    """Connected components of the fact graph, in canonical order.

    Ground facts are isolated components.
    """
    parent: dict = {}

    def find(x):
        while parent[x] is not x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra is not rb:
            parent[rb] = ra

    for f in inst.facts_sorted:
        parent[f] = f
    anchor: dict = {}
    for f in inst.facts_sorted:
        for a in f.args:
            if is_null(a):
                if a in anchor:
                    union(anchor[a], f)
                else:
                    anchor[a] = f
    groups: dict = {}
    for f in inst.facts_sorted:
        groups.setdefault(find(f), []).append(f)
    comps = [Instance(inst.schema, fs) for fs in groups.values()]
    comps.sort(key=lambda c: fact_key(c.facts_sorted[0]))
    return comps


# ---------------------------------------------------------------------------
# Pattern search: the bridge from values to the integer kernel.

@dataclass(frozen=True, slots=True)
class PatternVar:
    """Placeholder for an unknown value inside a search pattern."""

    name: object


def match_pattern(
    pattern: Iterable[tuple[str, tuple]],
    target_facts: Iterable[Fact],
    *,
    injective: bool = False,
    nulls_only: bool = False,
    presorted: bool = False,
) -> Optional[dict]:
    """Assign pattern variables to target values so that every pattern
    fact becomes a target fact.  Constants and concrete values in the
    pattern must match exactly.  Returns {PatternVar: Value} or None.

    Results are deterministic because targets are scanned in canonical
    order; pass presorted=True when the caller already supplies them
    sorted by fact_key to skip the re-sort.
    """
    if not presorted:
        target_facts = sorted(target_facts, key=fact_key)
    rel_ids: dict[str, int] = {}
    val_codes: dict = {}
    code_vals: list = []

    def rel_id(r):
        if r not in rel_ids:
            rel_ids[r] = len(rel_ids)
        return rel_ids[r]

    def val_code(v):
        if v not in val_codes:
            val_codes[v] = len(code_vals)
            code_vals.append(v)
        return val_codes[v]

    tgt = tuple(
        (rel_id(f.rel), tuple(val_code(a) for a in f.args)) for f in target_facts
    )
    n_target_codes = len(code_vals)

    var_ids: dict = {}
    pat = []
    for rel, args in pattern:
        enc = []
        for a in args:
            if isinstance(a, PatternVar):
                if a not in var_ids:
                    var_ids[a] = len(var_ids)
                enc.append(-1 - var_ids[a])
            else:
                enc.append(val_code(a))
        pat.append((rel_id(rel), tuple(enc)))

    allowed = None
    if nulls_only:
        allowed = frozenset(
            c for c in range(n_target_codes) if is_null(code_vals[c])
        )
    pat = kernel.order_pattern(pat)
    asn = kernel.find_hom(pat, tgt, len(var_ids), injective, allowed)
    if asn is None:
        return None
    return {var: code_vals[asn[idx]] for var, idx in var_ids.items() if asn[idx] >= 0}


# ---------------------------------------------------------------------------
# Homomorphisms.

class Homomorphism:
    """A value map fixing all constants, sending facts to facts."""

    __slots__ = ("mapping",)

    def __init__(self, mapping: Mapping[Value, Value]):
        self.mapping = dict(mapping)

    def __call__(self, v: Value) -> Value:
        m = self.mapping.get(v)
        if m is not None:
            return m
        if is_null(v):
            raise KeyError(f"homomorphism undefined on {v!r}")
        return v

    def __eq__(self, other):
        return isinstance(other, Homomorphism) and self.mapping == other.mapping

    def __repr__(self):
        nulls = {k: v for k, v in self.mapping.items() if is_null(k)}
        return f"Homomorphism({nulls!r})"

    def apply_fact(self, f: Fact) -> Fact:
        return Fact(f.rel, tuple(self(a) for a in f.args))

    def apply_instance(self, inst: Instance) -> Instance:
        return Instance(inst.schema, {self.apply_fact(f) for f in inst.facts})


def _pattern_of(inst: Instance):
    """Instance facts with nulls replaced by search variables."""
    return [
        (f.rel, tuple(PatternVar(a) if is_null(a) else a for a in f.args))
        for f in inst.facts_sorted
    ]


def find_homomorphism(i: Instance, j: Instance) -> Optional[Homomorphism]:
    """A homomorphism i -> j fixing constants, or None."""
    if i.schema != j.schema:
        raise MappingError("homomorphism requires a common schema")
    asn = match_pattern(_pattern_of(i), j.facts_sorted, presorted=True)
    if asn is None:
        return None
    mapping = {v: v for v in i.constants}
    mapping.update({pv.name: val for pv, val in asn.items()})
    for n in i.nulls:
        mapping.setdefault(n, n)  # nulls of empty patterns cannot occur
    return Homomorphism(mapping)


# ---------------------------------------------------------------------------
# Cores.

def _block_fold(block: Instance, ordered_facts: tuple) -> Optional[dict]:
    """A map of the block's nulls into values of the instance whose
    image misses at least one fact of the block, or None.
    """
    pattern = _pattern_of(block)
    for gone in block.facts_sorted:
        target = [f for f in ordered_facts if f != gone]
        asn = match_pattern(pattern, target, presorted=True)
        if asn is None:
            continue
        return {pv.name: val for pv, val in asn.items()}
    return None


def compute_core(j: Instance) -> tuple[Instance, Homomorphism]:
    """The core of j as a subinstance, with a retraction onto it.

    Repeatedly folds a block whose facts can be homomorphically mapped
    into the rest of the instance (or into fewer of its own facts); the
    fixpoint has no proper retracts.  Exponential in block size, which
    is small in this engine's workloads.
    """
    current = j
    comp = {v: v for v in j.dom}
    while True:
        reduced = False
        ordered = current.facts_sorted
        for block in blocks(current):
            if not any(is_null(a) for f in block.facts for a in f.args):
                continue
            fold = _block_fold(block, ordered)
            if fold is None:
                continue
            step = {v: fold.get(v, v) for v in current.dom}
            current = Instance(
                current.schema,
                {Fact(f.rel, tuple(step[a] for a in f.args)) for f in current.facts},
            )
            comp = {v: step.get(m, m) for v, m in comp.items()}
            reduced = True
            break
        if not reduced:
            break
    # comp: j -> current is a homomorphism but need not fix the core
    # pointwise; its restriction to the core is an automorphism e, so
    # composing with e^(order-1) yields a true retraction.
    e = {v: comp[v] for v in current.dom}
    order = 1
    p = dict(e)
    while any(p[v] != v for v in current.dom):
        p = {v: e[p[v]] for v in current.dom}
        order += 1
    retr = dict(comp)
    for _ in range(order - 1):
        retr = {v: e[w] for v, w in retr.items()}
    return current, Homomorphism(retr)


def is_core(j: Instance) -> bool:
    """True iff no block of j folds into the rest of the instance."""
    ordered = j.facts_sorted
    for block in blocks(j):
        if not any(is_null(a) for f in block.facts for a in f.args):
            continue
        if _block_fold(block, ordered) is not None:
            return False
    return True


# ---------------------------------------------------------------------------
# Isomorphism.

def _block_signature(block: Instance):
    return tuple(
        sorted(
            (f.rel, tuple(("n",) if is_null(a) else ("c", a.text) for a in f.args))
            for f in block.facts
        )
    )


def instances_isomorphic(i: Instance, j: Instance) -> bool:
    """Isomorphism test: identity on constants, a bijection on nulls.

    Blocks must map onto blocks, so the search pairs up blocks with
    matching constant signatures and runs an injective null-to-null
    match inside each pair.
    """
    if i.schema != j.schema:
        raise MappingError("isomorphism requires a common schema")
    if len(i.facts) != len(j.facts) or len(i.dom) != len(j.dom):
        return False
    if i.constants != j.constants or len(i.nulls) != len(j.nulls):
        return False
    iground = {f for f in i.facts if not any(is_null(a) for a in f.args)}
    jground = {f for f in j.facts if not any(is_null(a) for a in f.args)}
    if iground != jground:
        return False
    iblocks = [b for b in blocks(i) if b.facts_sorted[0] not in iground]
    jblocks = [b for b in blocks(j) if b.facts_sorted[0] not in jground]
    if len(iblocks) != len(jblocks):
        return False
    jsigs: dict = {}
    for idx, b in enumerate(jblocks):
        jsigs.setdefault(_block_signature(b), []).append(idx)

    def blocks_match(bi: Instance, bj: Instance) -> bool:
        if len(bi.facts) != len(bj.facts):
            return False
        asn = match_pattern(
            _pattern_of(bi), bj.facts_sorted, injective=True, nulls_only=True,
            presorted=True,
        )
        return asn is not None

    taken = [False] * len(jblocks)

    def assign(k: int) -> bool:
        if k == len(iblocks):
            return True
        sig = _block_signature(iblocks[k])
        for idx in jsigs.get(sig, ()):
            if taken[idx]:
                continue
            if blocks_match(iblocks[k], jblocks[idx]):
                taken[idx] = True
                if assign(k + 1):
                    return True
                taken[idx] = False
        return False

    return assign(0)


# ---------------------------------------------------------------------------
# Fact files: one fact per line, `R(a, b).`, nulls as ?N1 / ?f(a,b).

_BARE = re.compile(r"[A-Za-z0-9_]+\Z")
_TOKEN = re.compile(
    r"""\s*(?:(?P<comment>\#[^\n]*)
        |(?P<punct>[().,])
        |(?P<null>\?[A-Za-z_][A-Za-z0-9_]*)
        |(?P<bare>[A-Za-z0-9_]+)
        |(?P<quoted>'(?:[^'\\]|\\.)*')
        )""",
    re.VERBOSE,
)


def _quote(text: str) -> str:
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_value(v: Value) -> str:
    if isinstance(v, Const):
        return v.text if _BARE.match(v.text) else _quote(v.text)
    if isinstance(v, FreshNull):
        return f"?N{v.id}"
    inner = ", ".join(format_value(a) for a in v.args)
    return f"?{v.symbol}({inner})"


def format_facts(inst: Instance) -> str:
    lines = [
        f"{f.rel}({', '.join(format_value(a) for a in f.args)})."
        for f in inst.facts_sorted
    ]
    return "\n".join(lines) + ("\n" if lines else "")


class _FactReader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, s: str):
        for ch in s:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += len(s)

    def next_token(self):
        while True:
            ws = re.match(r"\s+", self.text[self.pos:])
            if ws:
                self._advance(ws.group(0))
            if self.pos >= len(self.text):
                return None
            m = _TOKEN.match(self.text, self.pos)
            if not m:
                raise ParseError(
                    f"unexpected character {self.text[self.pos]!r}",
                    self.line,
                    self.col,
                )
            self._advance(m.group(0))
            if m.lastgroup == "comment":
                continue
            return m.lastgroup, m.group(m.lastgroup)

    def expect(self, kind, value=None):
        tok = self.next_token()
        if tok is None or tok[0] != kind or (value is not None and tok[1] != value):
            got = "end of input" if tok is None else repr(tok[1])
            want = value if value is not None else kind
            raise ParseError(f"expected {want}, got {got}", self.line, self.col)
        return tok[1]


def _read_value(rd: _FactReader, tok) -> Value:
    kind, text = tok
    if kind == "bare":
        return Const(text)
    if kind == "quoted":
        body = text[1:-1].replace("\\'", "'").replace("\\\\", "\\")
        if not body:
            raise ParseError("empty constant", rd.line, rd.col)
        return Const(body)
    if kind == "null":
        name = text[1:]
        m = re.fullmatch(r"N([0-9]+)", name)
        nxt_is_paren = re.match(r"\s*\(", rd.text[rd.pos:])
        if m and not nxt_is_paren:
            return FreshNull(int(m.group(1)))
        rd.expect("punct", "(")
        args = []
        tok = rd.next_token()
        if tok == ("punct", ")"):
            return SkolemNull(name, ())
        while True:
            args.append(_read_value(rd, tok))
            tok = rd.next_token()
            if tok == ("punct", ")"):
                return SkolemNull(name, tuple(args))
            if tok != ("punct", ","):
                raise ParseError("expected ',' or ')'", rd.line, rd.col)
            tok = rd.next_token()
    raise ParseError(f"unexpected token {text!r}", rd.line, rd.col)


def parse_facts(text: str, schema: Schema) -> Instance:
    """Read a fact file into an instance over the given schema."""
    rd = _FactReader(text)
    facts = []
    while True:
        tok = rd.next_token()
        if tok is None:
            break
        if tok[0] != "bare":
            raise ParseError(f"expected relation name, got {tok[1]!r}", rd.line, rd.col)
        rel = tok[1]
        rd.expect("punct", "(")
        args = []
        tok = rd.next_token()
        if tok != ("punct", ")"):
            while True:
                args.append(_read_value(rd, tok))
                tok = rd.next_token()
                if tok == ("punct", ")"):
                    break
                if tok != ("punct", ","):
                    raise ParseError("expected ',' or ')'", rd.line, rd.col)
                tok = rd.next_token()
        rd.expect("punct", ".")
        if rel not in schema:
            raise ParseError(f"undeclared relation {rel}", rd.line, rd.col)
        if len(args) != schema.arity(rel):
            raise ParseError(
                f"arity mismatch for {rel}: expected {schema.arity(rel)}, got {len(args)}",
                rd.line,
                rd.col,
            )
        facts.append(Fact(rel, tuple(args)))
    return Instance(schema, facts)
