"""Abstract syntax for formulas over schemas, dependencies, and mappings.

Formulas are first-order with an order predicate over constants, plus a
`Certain` node that embeds the certain answers of a conjunctive target
query with respect to a base mapping.  Terms inside atoms are variables
or constants only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Union

from dx.model import Const, MappingError, Schema


@dataclass(frozen=True, slots=True)
class Var:
    name: str


Term = Union[Var, Const]


@dataclass(frozen=True, slots=True)
class RelAtom:
    rel: str
    args: tuple


@dataclass(frozen=True, slots=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Lt:
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class And:
    parts: tuple


@dataclass(frozen=True, slots=True)
class Or:
    parts: tuple


@dataclass(frozen=True, slots=True)
class Not:
    body: "Formula"


@dataclass(frozen=True, slots=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True, slots=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True, slots=True)
class TrueF:
    pass


@dataclass(frozen=True, slots=True)
class Certain:
    """Membership in the certain answers of `query` w.r.t. `base`."""

    query: "Formula"
    base: "SchemaMapping"


Formula = Union[RelAtom, Eq, Lt, And, Or, Not, Exists, Forall, TrueF, Certain]

TRUE = TrueF()
FALSE = Not(TRUE)


def conj(parts: Iterable[Formula]) -> Formula:
    """Flattened conjunction; drops `true`, deduplicates, unwraps singletons."""
    out = []
    for p in parts:
        if isinstance(p, TrueF):
            continue
        sub = p.parts if isinstance(p, And) else (p,)
        for q in sub:
            if q not in out:
                out.append(q)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(parts: Iterable[Formula]) -> Formula:
    out = []
    for p in parts:
        sub = p.parts if isinstance(p, Or) else (p,)
        for q in sub:
            if q not in out:
                out.append(q)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def exists_all(vars: Iterable[str], body: Formula) -> Formula:
    for v in reversed(tuple(vars)):
        body = Exists(v, body)
    return body


def neg(f: Formula) -> Formula:
    return f.body if isinstance(f, Not) else Not(f)


def is_true(f: Formula) -> bool:
    return isinstance(f, TrueF)


def is_false(f: Formula) -> bool:
    return isinstance(f, Not) and isinstance(f.body, TrueF)


def simplify(f: Formula) -> Formula:
    """Cheap constant propagation; keeps the formula's free variables.

    Quantifiers over constant bodies are only dropped when the bound
    variable does not occur, since exists/forall over an empty active
    domain differ from their bodies.
    """
    if isinstance(f, And):
        parts = [simplify(p) for p in f.parts]
        if any(is_false(p) for p in parts):
            return FALSE
        return conj(parts)
    if isinstance(f, Or):
        parts = [p for p in (simplify(q) for q in f.parts) if not is_false(p)]
        if any(is_true(p) for p in parts):
            return TRUE
        return disj(parts)
    if isinstance(f, Not):
        body = simplify(f.body)
        if is_true(body):
            return FALSE
        if is_false(body):
            return TRUE
        if isinstance(body, Not):
            return body.body
        return Not(body)
    if isinstance(f, (Exists, Forall)):
        body = simplify(f.body)
        if is_false(body) and isinstance(f, Exists):
            return FALSE
        if is_true(body) and isinstance(f, Forall):
            return TRUE
        return type(f)(f.var, body)
    if isinstance(f, Certain):
        return Certain(simplify(f.query), f.base)
    return f


def _term_vars(t: Term) -> frozenset:
    return frozenset((t.name,)) if isinstance(t, Var) else frozenset()


def free_vars(f: Formula) -> frozenset:
    if isinstance(f, RelAtom):
        return frozenset(a.name for a in f.args if isinstance(a, Var))
    if isinstance(f, (Eq, Lt)):
        return _term_vars(f.left) | _term_vars(f.right)
    if isinstance(f, (And, Or)):
        out = frozenset()
        for p in f.parts:
            out |= free_vars(p)
        return out
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - {f.var}
    if isinstance(f, TrueF):
        return frozenset()
    if isinstance(f, Certain):
        return free_vars(f.query)
    raise TypeError(f"not a formula: {f!r}")


def all_var_names(f: Formula) -> set:
    """Free and bound variable names occurring anywhere in f."""
    if isinstance(f, (Exists, Forall)):
        return {f.var} | all_var_names(f.body)
    if isinstance(f, (And, Or)):
        out = set()
        for p in f.parts:
            out |= all_var_names(p)
        return out
    if isinstance(f, Not):
        return all_var_names(f.body)
    if isinstance(f, Certain):
        return all_var_names(f.query)
    return set(free_vars(f))


def fresh_name(base: str, taken: set) -> str:
    if base not in taken:
        return base
    for i in itertools.count(1):
        cand = f"{base}_{i}"
        if cand not in taken:
            return cand
    raise AssertionError


def substitute(f: Formula, sub: dict) -> Formula:
    """Replace free variables by terms; renames bound variables on capture."""
    sub = {k: v for k, v in sub.items() if not (isinstance(v, Var) and v.name == k)}
    if not sub:
        return f

    def s_term(t: Term) -> Term:
        if isinstance(t, Var) and t.name in sub:
            return sub[t.name]
        return t

    if isinstance(f, RelAtom):
        return RelAtom(f.rel, tuple(s_term(a) for a in f.args))
    if isinstance(f, Eq):
        return Eq(s_term(f.left), s_term(f.right))
    if isinstance(f, Lt):
        return Lt(s_term(f.left), s_term(f.right))
    if isinstance(f, And):
        return And(tuple(substitute(p, sub) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(substitute(p, sub) for p in f.parts))
    if isinstance(f, Not):
        return Not(substitute(f.body, sub))
    if isinstance(f, (Exists, Forall)):
        inner = {k: v for k, v in sub.items() if k != f.var}
        relevant = {k: v for k, v in inner.items() if k in free_vars(f.body)}
        if not relevant:
            return f
        var = f.var
        body = f.body
        captured = {
            v.name for v in relevant.values() if isinstance(v, Var)
        }
        if var in captured:
            taken = all_var_names(body) | captured | set(relevant)
            var = fresh_name(f.var, taken)
            body = substitute(body, {f.var: Var(var)})
        return type(f)(var, substitute(body, relevant))
    if isinstance(f, TrueF):
        return f
    if isinstance(f, Certain):
        return Certain(substitute(f.query, sub), f.base)
    raise TypeError(f"not a formula: {f!r}")


def rename_bound(f: Formula, taken: set, counter=None) -> Formula:
    """Rename every bound variable to a name outside `taken`."""
    if counter is None:
        counter = itertools.count(1)
    if isinstance(f, (And, Or)):
        return type(f)(tuple(rename_bound(p, taken, counter) for p in f.parts))
    if isinstance(f, Not):
        return Not(rename_bound(f.body, taken, counter))
    if isinstance(f, (Exists, Forall)):
        new = f.var
        while new in taken:
            new = f"q{next(counter)}"
        taken = taken | {new}
        body = f.body if new == f.var else substitute(f.body, {f.var: Var(new)})
        return type(f)(new, rename_bound(body, taken, counter))
    if isinstance(f, Certain):
        return Certain(rename_bound(f.query, taken, counter), f.base)
    return f


# ---------------------------------------------------------------------------
# Dependencies and mappings.

@dataclass(frozen=True)
class TGD:
    """forall x (antecedent -> exists y. /\\ consequent)."""

    antecedent: Formula
    exist_vars: tuple
    consequent: tuple

    def __post_init__(self):
        # the consequent is a set of atoms; drop duplicates
        object.__setattr__(
            self, "consequent", tuple(dict.fromkeys(self.consequent))
        )
        if not self.consequent:
            raise MappingError("dependency consequent must be nonempty")
        free = free_vars(self.antecedent)
        ev = set(self.exist_vars)
        if len(ev) != len(self.exist_vars):
            raise MappingError("duplicate existential variable")
        if ev & free:
            raise MappingError(
                f"existential variables also free in the antecedent: {sorted(ev & free)}"
            )
        for atom in self.consequent:
            if not isinstance(atom, RelAtom):
                raise MappingError("consequent must consist of relational atoms")
            for a in atom.args:
                if isinstance(a, Var) and a.name not in ev and a.name not in free:
                    raise MappingError(
                        f"unsafe dependency: consequent variable {a.name} "
                        "is not free in the antecedent"
                    )

    @property
    def universal_vars(self) -> tuple:
        """All free antecedent variables, sorted; fixes Skolem argument order."""
        return tuple(sorted(free_vars(self.antecedent)))


def _check_formula_schema(f: Formula, schema: Schema, where: str):
    if isinstance(f, RelAtom):
        if f.rel not in schema:
            raise MappingError(f"{where}: undeclared relation {f.rel}")
        if len(f.args) != schema.arity(f.rel):
            raise MappingError(
                f"{where}: arity mismatch for {f.rel}: "
                f"expected {schema.arity(f.rel)}, got {len(f.args)}"
            )
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            _check_formula_schema(p, schema, where)
    elif isinstance(f, Not):
        _check_formula_schema(f.body, schema, where)
    elif isinstance(f, (Exists, Forall)):
        _check_formula_schema(f.body, schema, where)
    elif isinstance(f, Certain):
        _check_formula_schema(f.query, f.base.target, where + " (certain query)")
    elif isinstance(f, (Eq, Lt, TrueF)):
        pass
    else:
        raise TypeError(f"not a formula: {f!r}")


@dataclass(frozen=True)
class SchemaMapping:
    source: Schema
    target: Schema
    tgds: tuple

    def __post_init__(self):
        overlap = set(self.source.names()) & set(self.target.names())
        if overlap:
            raise MappingError(f"source and target schemas overlap: {sorted(overlap)}")
        for tgd in self.tgds:
            _check_formula_schema(tgd.antecedent, self.source, "antecedent")
            for atom in tgd.consequent:
                _check_formula_schema(atom, self.target, "consequent")


def has_certain(f: Formula) -> bool:
    if isinstance(f, Certain):
        return True
    if isinstance(f, (And, Or)):
        return any(has_certain(p) for p in f.parts)
    if isinstance(f, (Not, Exists, Forall)):
        return has_certain(f.body)
    return False


def mapping_certain_free(m: SchemaMapping) -> bool:
    return not any(has_certain(t.antecedent) for t in m.tgds)


def decompose(m: SchemaMapping) -> SchemaMapping:
    """Split every dependency along the connected components of its
    consequent, where two atoms are connected iff they share an
    existential variable.  Logically equivalent to the input.
    """
    out = []
    for tgd in m.tgds:
        ev = set(tgd.exist_vars)
        atoms = list(tgd.consequent)
        parent = list(range(len(atoms)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i, j):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[rj] = ri

        seen: dict[str, int] = {}
        for i, atom in enumerate(atoms):
            for a in atom.args:
                if isinstance(a, Var) and a.name in ev:
                    if a.name in seen:
                        union(seen[a.name], i)
                    else:
                        seen[a.name] = i
        comps: dict[int, list] = {}
        for i in range(len(atoms)):
            comps.setdefault(find(i), []).append(atoms[i])
        for root in sorted(comps):
            comp_atoms = tuple(comps[root])
            comp_vars = {
                a.name
                for atom in comp_atoms
                for a in atom.args
                if isinstance(a, Var) and a.name in ev
            }
            out.append(
                TGD(
                    tgd.antecedent,
                    tuple(v for v in tgd.exist_vars if v in comp_vars),
                    comp_atoms,
                )
            )
    return SchemaMapping(m.source, m.target, tuple(out))


# ---------------------------------------------------------------------------
# Printing (inverse of the parser for the Certain-free fragment).

# Precedence levels: quantifiers 0 (body extends maximally), | 1, & 2,
# ! 3, atoms and comparisons 4.  A construct is parenthesized when the
# context demands a higher level than its own.

def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    return "'" + t.text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, RelAtom):
        return f"{f.rel}({', '.join(format_term(a) for a in f.args)})"
    if isinstance(f, Eq):
        return f"{format_term(f.left)} = {format_term(f.right)}"
    if isinstance(f, Lt):
        return f"{format_term(f.left)} < {format_term(f.right)}"
    if isinstance(f, And):
        body = " & ".join(format_formula(p, 3) for p in f.parts)
        return _wrap(body, prec > 2)
    if isinstance(f, Or):
        body = " | ".join(format_formula(p, 2) for p in f.parts)
        return _wrap(body, prec > 1)
    if isinstance(f, Not):
        return "!" + format_formula(f.body, 3)
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        names = [f.var]
        body = f.body
        while isinstance(body, type(f)):
            names.append(body.var)
            body = body.body
        text = f"{kw} {', '.join(names)}: {format_formula(body, 0)}"
        return _wrap(text, prec > 0)
    if isinstance(f, Certain):
        return f"certain[{format_formula(f.query, 0)}]"
    raise TypeError(f"not a formula: {f!r}")


def _wrap(text: str, wrap: bool) -> str:
    return f"({text})" if wrap else text


def format_tgd(tgd: TGD) -> str:
    head = format_formula(tgd.antecedent, 0)
    atoms = " & ".join(format_formula(a) for a in tgd.consequent)
    if tgd.exist_vars:
        rhs = f"exists {', '.join(tgd.exist_vars)}: {atoms}"
    else:
        rhs = atoms
    return f"tgd: {head} -> {rhs}."


def format_mapping(m: SchemaMapping) -> str:
    lines = []
    for label, schema in (("source", m.source), ("target", m.target)):
        if schema.rels:
            decls = ", ".join(f"{n}/{a}" for n, a in schema.rels)
            lines.append(f"{label} {decls}.")
    for tgd in m.tgds:
        lines.append(format_tgd(tgd))
    return "\n".join(lines) + "\n"
