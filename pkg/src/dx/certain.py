"""Certain answers to conjunctive target queries.

Two routes are implemented and kept in agreement:

* operational: chase the source instance and take the ground answers of
  the query in the canonical universal solution;
* syntactic: unfold the query through the mapping's term interpretation
  into a union of source conditions (used to eliminate `certain[...]`
  nodes before SQL emission).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from dx.chase import App, naive_chase, to_term_interpretation
from dx.evaluator import ground_answers
from dx.lang import (
    And,
    Certain,
    Eq,
    Exists,
    Forall,
    Formula,
    Not,
    Or,
    RelAtom,
    SchemaMapping,
    TrueF,
    Var,
    conj,
    disj,
    exists_all,
    free_vars,
    mapping_certain_free,
    rename_bound,
    substitute,
)
from dx.model import Const, Instance, MappingError


def cq_parts(q: Formula):
    """Split a conjunctive query into (existential vars, atoms, equalities).

    Raises MappingError when q is not of the form exists* (and of
    relational atoms and equalities).
    """
    exist = []
    body = q
    while isinstance(body, Exists):
        exist.append(body.var)
        body = body.body
    atoms: list = []
    eqs: list = []

    def walk(f):
        if isinstance(f, RelAtom):
            atoms.append(f)
        elif isinstance(f, Eq):
            eqs.append(f)
        elif isinstance(f, And):
            for p in f.parts:
                walk(p)
        elif isinstance(f, TrueF):
            pass
        else:
            raise MappingError(f"not a conjunctive query: {q!r}")

    walk(body)
    return tuple(exist), tuple(atoms), tuple(eqs)


def is_cq(q: Formula) -> bool:
    try:
        cq_parts(q)
        return True
    except MappingError:
        return False


def certain_answers(m: SchemaMapping, q: Formula, inst: Instance, free=None):
    """Ground answers of the conjunctive query q in the canonical
    universal solution of inst; sound and complete for CQs.
    """
    cq_parts(q)
    if not mapping_certain_free(m):
        raise MappingError("certain answers require a certain[...]-free mapping")
    if free is None:
        free = tuple(sorted(free_vars(q)))
    return _certain_cached(m, q, inst, tuple(free))


@lru_cache(maxsize=16384)
def _certain_cached(m, q, inst, free):
    return frozenset(ground_answers(q, naive_chase(m, inst), free))


# ---------------------------------------------------------------------------
# Unfolding through the term interpretation.

@dataclass(frozen=True)
class Disjunct:
    condition: Formula
    equalities: frozenset  # pairs of identified answer variables


@dataclass(frozen=True)
class UnfoldedRewriting:
    free: tuple
    disjuncts: tuple

    def as_formula(self) -> Formula:
        parts = []
        for d in self.disjuncts:
            eqs = [Eq(Var(u), Var(v)) for u, v in sorted(d.equalities)]
            parts.append(conj([d.condition] + eqs))
        return disj(parts)


class _Unifier:
    """Union-find over query/branch variables with term bindings.

    Nodes are ('q', name) for query variables and ('b', i, name) for
    variables of the i-th chosen branch.  A class may be bound to a
    constant or to a function term whose arguments are again nodes,
    constants, or terms.
    """

    def __init__(self):
        self.parent: dict = {}
        self.binding: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _occurs(self, node, term) -> bool:
        if isinstance(term, tuple) and term and term[0] == "app":
            return any(self._occurs(node, a) for a in term[2])
        if isinstance(term, tuple) and len(term) in (2, 3) and term[0] in ("q", "b"):
            return self.find(term) == node
        return False

    def unify(self, a, b) -> bool:
        a = self._resolve(a)
        b = self._resolve(b)
        if a == b:
            return True
        a_node = self._is_node(a)
        b_node = self._is_node(b)
        if a_node and b_node:
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                return True
            self.parent[rb] = ra
            bound = self.binding.pop(rb, None)
            if bound is not None:
                return self._bind(ra, bound)
            return True
        if a_node:
            return self._bind(self.find(a), b)
        if b_node:
            return self._bind(self.find(b), a)
        return self._unify_terms(a, b)

    def _is_node(self, t) -> bool:
        return isinstance(t, tuple) and len(t) in (2, 3) and t[0] in ("q", "b")

    def _resolve(self, t):
        if self._is_node(t):
            r = self.find(t)
            return self.binding.get(r, r)
        return t

    def _bind(self, root, term) -> bool:
        term = self._resolve(term)
        if self._is_node(term):
            return self.unify(root, term)
        if self._occurs(root, term):
            return False
        old = self.binding.get(root)
        if old is None:
            self.binding[root] = term
            return True
        return self._unify_terms(old, term)

    def _unify_terms(self, a, b) -> bool:
        a_app = isinstance(a, tuple) and a and a[0] == "app"
        b_app = isinstance(b, tuple) and b and b[0] == "app"
        if a_app and b_app:
            if a[1] != b[1] or len(a[2]) != len(b[2]):
                return False
            return all(self.unify(x, y) for x, y in zip(a[2], b[2]))
        if a_app or b_app:
            return False  # a proper term never equals a constant
        return a == b  # two constants

    def resolved(self, node):
        """Final value of a node: a node root, a constant, or an app term."""
        return self._resolve(node)

    def term_is_proper(self, t) -> bool:
        t = self._resolve(t) if self._is_node(t) else t
        if isinstance(t, tuple) and t and t[0] == "app":
            return True
        return False


def _term_to_internal(t, branch_idx):
    if isinstance(t, Var):
        return ("b", branch_idx, t.name)
    if isinstance(t, Const):
        return t
    if isinstance(t, App):
        return ("app", t.symbol, tuple(_term_to_internal(a, branch_idx) for a in t.args))
    raise TypeError(f"not a term: {t!r}")


def unfold(m: SchemaMapping, q: Formula) -> UnfoldedRewriting:
    """Source rewriting of the certain answers of a conjunctive query.

    Every way of sending the query atoms to defining branches of the
    term interpretation is tried; the branch terms are unified with the
    query arguments (answer variables may only unify with non-proper
    terms), and each success contributes one disjunct: the conjunction
    of the branch conditions under the unifying substitution.
    """
    return _unfold_cached(m, q)


@lru_cache(maxsize=4096)
def _unfold_cached(m: SchemaMapping, q: Formula) -> UnfoldedRewriting:
    if not mapping_certain_free(m):
        raise MappingError("unfolding requires a certain[...]-free mapping")
    exist, atoms, eqs = cq_parts(q)
    free = tuple(sorted(free_vars(q)))
    pi = to_term_interpretation(m)
    per_atom = []
    for atom in atoms:
        branches = pi.branches_for(atom.rel)
        per_atom.append(branches)
    disjuncts: list = []
    seen = set()
    for choice in itertools.product(*per_atom) if atoms else [()]:
        uf = _Unifier()
        ok = True
        for eq in eqs:
            lhs = ("q", eq.left.name) if isinstance(eq.left, Var) else eq.left
            rhs = ("q", eq.right.name) if isinstance(eq.right, Var) else eq.right
            if not uf.unify(lhs, rhs):
                ok = False
                break
        if ok:
            for idx, (atom, branch) in enumerate(zip(atoms, choice)):
                for arg, term in zip(atom.args, branch.terms):
                    qterm = ("q", arg.name) if isinstance(arg, Var) else arg
                    if not uf.unify(qterm, _term_to_internal(term, idx)):
                        ok = False
                        break
                if not ok:
                    break
        if not ok:
            continue
        # answer variables and branch variables must stay non-proper
        for v in free:
            if uf.term_is_proper(("q", v)):
                ok = False
                break
        if ok:
            for idx, branch in enumerate(choice):
                for p in branch.params:
                    if uf.term_is_proper(("b", idx, p)):
                        ok = False
                        break
                if not ok:
                    break
        if not ok:
            continue
        d = _build_disjunct(uf, free, atoms, choice)
        if d is not None and d not in seen:
            seen.add(d)
            disjuncts.append(d)
    return UnfoldedRewriting(free, tuple(disjuncts))


def _build_disjunct(uf: _Unifier, free, atoms, choice):
    # group the grounded variables (answer vars and branch params) by class
    classes: dict = {}
    for v in free:
        classes.setdefault(uf.find(("q", v)), []).append(("q", v))
    for idx, branch in enumerate(choice):
        for p in branch.params:
            classes.setdefault(uf.find(("b", idx, p)), []).append(("b", idx, p))

    rep_term: dict = {}
    equalities = set()
    extra_eqs = []
    fresh_names: list = []
    taken = set(free)
    counter = itertools.count(1)
    for root in sorted(classes, key=repr):
        members = classes[root]
        bound = uf.binding.get(root)
        frees = sorted(n[1] for n in members if n[0] == "q" and n[1] in free)
        if bound is not None:
            if not isinstance(bound, Const):
                return None  # grounded class bound to a proper term
            term = bound
            for u in frees:
                extra_eqs.append(Eq(Var(u), bound))
        elif frees:
            term = Var(frees[0])
            for other in frees[1:]:
                equalities.add((frees[0], other))
        else:
            name = f"w{next(counter)}"
            while name in taken:
                name = f"w{next(counter)}"
            taken.add(name)
            fresh_names.append(name)
            term = Var(name)
        rep_term[root] = term

    conds = []
    for idx, branch in enumerate(choice):
        sub = {}
        for p in branch.params:
            sub[p] = rep_term[uf.find(("b", idx, p))]
        cond = rename_bound(branch.condition, taken | set(branch.params))
        conds.append(substitute(cond, sub))
    body = conj(conds + extra_eqs)
    used_fresh = [n for n in fresh_names if n in free_vars(body)]
    return Disjunct(exists_all(used_fresh, body), frozenset(equalities))


def eliminate(f: Formula) -> Formula:
    """Replace every certain[...] node by its unfolded source rewriting."""
    from dx.lang import simplify

    return simplify(_eliminate(f))


def _eliminate(f: Formula) -> Formula:
    if isinstance(f, Certain):
        return unfold(f.base, f.query).as_formula()
    if isinstance(f, And):
        return And(tuple(_eliminate(p) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_eliminate(p) for p in f.parts))
    if isinstance(f, Not):
        return Not(_eliminate(f.body))
    if isinstance(f, Exists):
        return Exists(f.var, _eliminate(f.body))
    if isinstance(f, Forall):
        return Forall(f.var, _eliminate(f.body))
    return f


def eliminate_mapping(m: SchemaMapping) -> SchemaMapping:
    """Eliminate certain[...] from every antecedent of a mapping."""
    from dx.lang import TGD

    return SchemaMapping(
        m.source,
        m.target,
        tuple(
            TGD(eliminate(t.antecedent), t.exist_vars, t.consequent) for t in m.tgds
        ),
    )
