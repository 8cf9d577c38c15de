"""Rewriting a mapping so that its canonical solution is always a core.

Pipeline: decompose the input, enumerate the fact-block types its core
solutions can realize, compute for each type a precondition (exactly
when the type is realized, phrased with certain[...] nodes over the
input mapping) and a side condition (an order constraint breaking the
symmetries of non-rigid types), and assemble one dependency per type.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from dx.lang import (
    And,
    Certain,
    Eq,
    Exists,
    Formula,
    Lt,
    Not,
    Or,
    RelAtom,
    SchemaMapping,
    TGD,
    TRUE,
    TrueF,
    Var,
    conj,
    decompose,
    disj,
    exists_all,
    mapping_certain_free,
    neg,
    substitute,
)
from dx.model import (
    Const,
    Fact,
    FreshNull,
    Instance,
    MappingError,
    Schema,
    blocks,
    is_core,
)

SideCondition = Formula


@dataclass(frozen=True)
class BlockType:
    """An atom set over constant variables and null variables.

    Stored in canonical form: constant variables are named x1..xm, null
    variables y1..yn, and the naming minimizes the sorted atom list, so
    two types are renamings of each other iff they are equal.
    """

    atoms: tuple
    const_vars: tuple
    null_vars: tuple

    def canonical_instance(self) -> Instance:
        """Constant variables as distinct constants, null variables as
        distinct nulls."""
        env: dict = {}
        for i, x in enumerate(self.const_vars):
            env[x] = Const(f"c#{i + 1}")
        for j, y in enumerate(self.null_vars):
            env[y] = FreshNull(j + 1)
        rels = {}
        for atom in self.atoms:
            rels[atom.rel] = len(atom.args)
        facts = [
            Fact(
                atom.rel,
                tuple(env[a.name] if isinstance(a, Var) else a for a in atom.args),
            )
            for atom in self.atoms
        ]
        return Instance(Schema(rels), facts)

    def query(self) -> Formula:
        """exists nulls: conjunction of the atoms."""
        return exists_all(self.null_vars, conj(self.atoms))


def _atom_key(atom: RelAtom, cmap: dict, nmap: dict):
    parts = []
    for a in atom.args:
        if isinstance(a, Var):
            if a.name in cmap:
                parts.append(("x", cmap[a.name]))
            else:
                parts.append(("y", nmap[a.name]))
        else:
            parts.append(("k", a.text))
    return (atom.rel, tuple(parts))


def make_block_type(atoms, const_vars, null_vars) -> BlockType:
    """Canonicalize an atom set into a BlockType (renaming-invariant)."""
    atoms = tuple(dict.fromkeys(atoms))
    const_vars = tuple(dict.fromkeys(const_vars))
    null_vars = tuple(dict.fromkeys(null_vars))
    best = None
    for cperm in itertools.permutations(const_vars):
        cmap = {x: i + 1 for i, x in enumerate(cperm)}
        for nperm in itertools.permutations(null_vars):
            nmap = {y: j + 1 for j, y in enumerate(nperm)}
            key = tuple(sorted(_atom_key(a, cmap, nmap) for a in atoms))
            if best is None or key < best[0]:
                best = (key, cmap, nmap)
    key, cmap, nmap = best
    renamed = []
    for rel, parts in key:
        args = []
        for kind, v in parts:
            if kind == "x":
                args.append(Var(f"x{v}"))
            elif kind == "y":
                args.append(Var(f"y{v}"))
            else:
                args.append(Const(v))
        renamed.append(RelAtom(rel, tuple(args)))
    return BlockType(
        tuple(renamed),
        tuple(f"x{i + 1}" for i in range(len(const_vars))),
        tuple(f"y{j + 1}" for j in range(len(null_vars))),
    )


def block_type_key(t: BlockType):
    return tuple(
        (
            a.rel,
            tuple(
                ("v", v.name) if isinstance(v, Var) else ("#", v.text)
                for v in a.args
            ),
        )
        for a in t.atoms
    )


# ---------------------------------------------------------------------------
# Type generation.

def _reject_consequent_constants(m: SchemaMapping):
    for tgd in m.tgds:
        for atom in tgd.consequent:
            if any(not isinstance(a, Var) for a in atom.args):
                raise MappingError(
                    "the laconic rewriting is defined for variable-only "
                    "consequents; constants in consequent atoms are not "
                    "supported (they are fine in antecedents)"
                )


def generate_block_types(m: SchemaMapping) -> tuple:
    """All fact-block types that the core solutions of m can realize.

    For every dependency and every subset of its existential variables:
    keep the consequent atoms avoiding the dropped variables, provided
    the result is nonempty, connected, has a core canonical instance,
    and can be separated from the surrounding consequent by a
    retraction.  Deduplicated up to renaming.
    """
    m = decompose(m)
    _reject_consequent_constants(m)
    seen = {}
    for tgd in m.tgds:
        atoms = tgd.consequent
        ev = list(tgd.exist_vars)
        for bits in range(2 ** len(ev)):
            dropped = {ev[i] for i in range(len(ev)) if not bits >> i & 1}
            kept_atoms = tuple(
                a
                for a in atoms
                if not any(
                    isinstance(v, Var) and v.name in dropped for v in a.args
                )
            )
            if not kept_atoms:
                continue
            kept_nulls = [
                y
                for y in ev
                if y not in dropped
                and any(
                    isinstance(v, Var) and v.name == y
                    for a in kept_atoms
                    for v in a.args
                )
            ]
            const_vars = []
            for a in kept_atoms:
                for v in a.args:
                    if (
                        isinstance(v, Var)
                        and v.name not in tgd.exist_vars
                        and v.name not in const_vars
                    ):
                        const_vars.append(v.name)
            if not _separable_for(tgd, kept_atoms, set(kept_nulls)):
                continue
            t = make_block_type(kept_atoms, const_vars, kept_nulls)
            inst = t.canonical_instance()
            if len(blocks(inst)) != 1:
                continue
            if not is_core(inst):
                continue
            seen.setdefault(block_type_key(t), t)
    return tuple(seen[k] for k in sorted(seen))


def _separable_for(tgd: TGD, kept_atoms, kept_nulls) -> bool:
    ev = set(tgd.exist_vars)
    kept_set = set(kept_atoms)
    touching = [
        a
        for a in tgd.consequent
        if a not in kept_set
        and any(isinstance(v, Var) and v.name in kept_nulls for v in a.args)
    ]
    if not touching:
        return True

    class UF:
        def __init__(self):
            self.parent: dict = {}
            self.anchor: dict = {}

        def find(self, x):
            self.parent.setdefault(x, x)
            while self.parent[x] != x:
                self.parent[x] = self.parent[self.parent[x]]
                x = self.parent[x]
            return x

        def union(self, a, b) -> bool:
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                return True
            aa, ab = self.anchor.get(ra), self.anchor.get(rb)
            if aa is not None and ab is not None and aa != ab:
                return False
            self.parent[rb] = ra
            if ab is not None:
                self.anchor[ra] = ab
            return True

        def set_anchor(self, x, lit) -> bool:
            r = self.find(x)
            old = self.anchor.get(r)
            if old is not None and old != lit:
                return False
            self.anchor[r] = lit
            return True

    state = {"uf": UF(), "sigma": {}}

    def entry_of(term):
        if isinstance(term, Var):
            if term.name in kept_nulls:
                return ("null", term.name)
            return ("cvar", term.name)
        return ("lit", term.text)

    def agree(e1, e2) -> bool:
        uf = state["uf"]
        if e1[0] == "null" or e2[0] == "null":
            return e1 == e2
        if e1[0] == "cvar" and e2[0] == "cvar":
            return uf.union(e1[1], e2[1])
        if e1[0] == "cvar":
            return uf.set_anchor(e1[1], e2[1])
        if e2[0] == "cvar":
            return uf.set_anchor(e2[1], e1[1])
        return e1[1] == e2[1]

    def match_atom(a: RelAtom, target: RelAtom) -> bool:
        if a.rel != target.rel or len(a.args) != len(target.args):
            return False
        sigma = state["sigma"]
        for src, dst in zip(a.args, target.args):
            dst_entry = entry_of(dst)
            if isinstance(src, Var) and src.name in kept_nulls:
                if dst_entry != ("null", src.name):
                    return False
            elif isinstance(src, Var) and src.name in ev:
                prev = sigma.get(src.name)
                if prev is None:
                    if dst_entry[0] == "null" and dst_entry[1] not in kept_nulls:
                        return False
                    sigma[src.name] = dst_entry
                elif not agree(prev, dst_entry):
                    return False
            else:  # universal variable or literal constant
                if dst_entry[0] == "null":
                    return False
                src_entry = (
                    ("cvar", src.name) if isinstance(src, Var) else ("lit", src.text)
                )
                if not agree(src_entry, dst_entry):
                    return False
        return True

    def search(i) -> bool:
        if i == len(touching):
            return True
        for target in kept_atoms:
            saved = (
                dict(state["uf"].parent),
                dict(state["uf"].anchor),
                dict(state["sigma"]),
            )
            if match_atom(touching[i], target) and search(i + 1):
                return True
            state["uf"].parent, state["uf"].anchor = dict(saved[0]), dict(saved[1])
            state["sigma"] = dict(saved[2])
        return False

    return search(0)


# ---------------------------------------------------------------------------
# Renamings, embeddings, self-maps.

def renamings_between(t: BlockType, t2: BlockType) -> list:
    """All renamings t -> t2: bijections on constant variables and on
    null variables mapping the atom set onto the atom set."""
    if len(t.const_vars) != len(t2.const_vars) or len(t.null_vars) != len(t2.null_vars):
        return []
    out = []
    atoms2 = set(t2.atoms)
    for cperm in itertools.permutations(t2.const_vars):
        cmap = dict(zip(t.const_vars, cperm))
        for nperm in itertools.permutations(t2.null_vars):
            nmap = dict(zip(t.null_vars, nperm))
            ren = {**cmap, **nmap}
            image = {
                RelAtom(
                    a.rel,
                    tuple(
                        Var(ren[v.name]) if isinstance(v, Var) else v for v in a.args
                    ),
                )
                for a in t.atoms
            }
            if image == atoms2:
                out.append(ren)
    return out


def renaming_between(t: BlockType, t2: BlockType):
    """One renaming t -> t2, or None."""
    rens = renamings_between(t, t2)
    return rens[0] if rens else None


@dataclass(frozen=True)
class Embedding:
    const_map: tuple  # pairs (var of t, var of t2)
    null_map: tuple
    strict: bool

    def as_dict(self) -> dict:
        return dict(self.const_map) | dict(self.null_map)


def embeddings_between(t: BlockType, t2: BlockType) -> list:
    """All embeddings of t into t2: constant variables map (not
    necessarily injectively) into constant variables, null variables
    injectively into null variables, atoms land on atoms.  The strict
    flag marks embeddings whose image misses some atom of t2."""
    out = []
    atoms2 = set(t2.atoms)
    if len(t.null_vars) > len(t2.null_vars):
        return []
    cvars2 = t2.const_vars if t2.const_vars else ()
    if t.const_vars and not cvars2:
        return []
    for cchoice in itertools.product(cvars2, repeat=len(t.const_vars)):
        cmap = dict(zip(t.const_vars, cchoice))
        for nchoice in itertools.permutations(t2.null_vars, len(t.null_vars)):
            nmap = dict(zip(t.null_vars, nchoice))
            ren = {**cmap, **nmap}
            image = {
                RelAtom(
                    a.rel,
                    tuple(
                        Var(ren[v.name]) if isinstance(v, Var) else v for v in a.args
                    ),
                )
                for a in t.atoms
            }
            if image <= atoms2:
                out.append(
                    Embedding(
                        tuple(sorted(cmap.items())),
                        tuple(sorted(nmap.items())),
                        strict=bool(atoms2 - image),
                    )
                )
    return out


def strict_embeddings(t: BlockType, t2: BlockType) -> list:
    return [e for e in embeddings_between(t, t2) if e.strict]


def self_maps(t: BlockType) -> list:
    """All substitutions (constant part arbitrary, null part bijective)
    mapping the atom set onto exactly itself; includes the identity."""
    out = []
    atoms = set(t.atoms)
    for cchoice in itertools.product(t.const_vars, repeat=len(t.const_vars)):
        cmap = dict(zip(t.const_vars, cchoice))
        for nperm in itertools.permutations(t.null_vars):
            nmap = dict(zip(t.null_vars, nperm))
            ren = {**cmap, **nmap}
            image = {
                RelAtom(
                    a.rel,
                    tuple(
                        Var(ren[v.name]) if isinstance(v, Var) else v for v in a.args
                    ),
                )
                for a in t.atoms
            }
            if image == atoms:
                out.append((cmap, nmap))
    return out


# ---------------------------------------------------------------------------
# Preconditions.

def _precon_prime(t: BlockType, m: SchemaMapping) -> Formula:
    """Certain realization of t at the answer tuple, minus every way the
    type could collapse (two nulls forced equal, or a null forced to a
    constant)."""
    parts = [Certain(t.query(), m)]
    ys = t.null_vars
    for i, yi in enumerate(ys):
        for j, yj in enumerate(ys):
            if i == j:
                continue
            rest = tuple(y for y in ys if y != yi)
            collapsed = [substitute(a, {yi: Var(yj)}) for a in t.atoms]
            parts.append(
                Not(Certain(exists_all(rest, conj(collapsed)), m))
            )
    taken = set(t.const_vars) | set(t.null_vars)
    for yi in ys:
        w = "xc"
        k = 0
        while w in taken:
            k += 1
            w = f"xc{k}"
        rest = tuple(y for y in ys if y != yi)
        collapsed = [substitute(a, {yi: Var(w)}) for a in t.atoms]
        parts.append(
            Not(Exists(w, Certain(exists_all(rest, conj(collapsed)), m)))
        )
    return conj(parts)


def _fact_equality(a1: RelAtom, a2: RelAtom, null_vars) -> Formula | None:
    """Condition on the constant variables under which the two atoms
    denote the same fact (null variables stand for distinct nulls).
    None when they can never coincide."""
    if a1.rel != a2.rel or len(a1.args) != len(a2.args):
        return None
    eqs = []
    for v1, v2 in zip(a1.args, a2.args):
        n1 = isinstance(v1, Var) and v1.name in null_vars
        n2 = isinstance(v2, Var) and v2.name in null_vars
        if n1 or n2:
            if not (n1 and n2 and v1.name == v2.name):
                return None
            continue
        if v1 == v2:
            continue
        if isinstance(v1, Var) or isinstance(v2, Var):
            eqs.append(Eq(v1, v2))
        else:
            return None  # distinct literal constants
    return conj(eqs)


def _proper_instantiation(t: BlockType, t2: BlockType, emb: Embedding) -> Formula:
    """Condition (over t2's constant variables) under which the embedded
    image of t is a proper sub-block of t2's realization.  A strict
    embedding can degenerate when identifying constants makes the
    missing atoms coincide with image atoms."""
    ren = emb.as_dict()
    image = list(
        dict.fromkeys(
            RelAtom(
                a.rel,
                tuple(Var(ren[v.name]) if isinstance(v, Var) else v for v in a.args),
            )
            for a in t.atoms
        )
    )
    missing = [a for a in t2.atoms if a not in image]
    options = []
    for a in missing:
        coincide = []
        for b in image:
            eq = _fact_equality(a, b, set(t2.null_vars))
            if eq is not None:
                coincide.append(eq)
        options.append(neg(disj(coincide)) if coincide else TRUE)
    return disj(options)


def precondition(t: BlockType, types, m: SchemaMapping) -> Formula:
    """Formula over the source (free variables: t's constant variables)
    holding at exactly the tuples where t is realized in the core
    universal solution."""
    base = _precon_prime(t, m)
    guards = []
    for t2 in types:
        for emb in strict_embeddings(t, t2):
            fresh = {x: Var(f"v{k + 1}") for k, x in enumerate(t2.const_vars)}
            ren = emb.as_dict()
            eqs = [
                Eq(Var(x), fresh[ren[x]]) for x in t.const_vars
            ]
            inner = conj(
                eqs
                + [substitute(_precon_prime(t2, m), fresh)]
                + [substitute(_proper_instantiation(t, t2, emb), fresh)]
            )
            guards.append(
                Not(exists_all([v.name for v in fresh.values()], inner))
            )
    return conj([base] + guards)


# ---------------------------------------------------------------------------
# Side conditions.

def _order_formula_holds(f: Formula, env: dict) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, And):
        return all(_order_formula_holds(p, env) for p in f.parts)
    if isinstance(f, Or):
        return any(_order_formula_holds(p, env) for p in f.parts)
    if isinstance(f, Not):
        return not _order_formula_holds(f.body, env)
    if isinstance(f, Eq):
        return env[f.left.name] == env[f.right.name]
    if isinstance(f, Lt):
        return env[f.left.name] < env[f.right.name]
    raise TypeError(f"not an order formula: {f!r}")


def _order_type(names, values) -> Formula:
    """Complete description of the order pattern of `values`: for each
    pair exactly one of <, =, > holds."""
    parts = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if values[i] < values[j]:
                parts.append(Lt(Var(names[i]), Var(names[j])))
            elif values[i] == values[j]:
                parts.append(Eq(Var(names[i]), Var(names[j])))
            else:
                parts.append(Lt(Var(names[j]), Var(names[i])))
    return conj(parts)


def _realized_block_form(t: BlockType, values):
    """Canonical form of the block t(values, fresh distinct nulls).

    Two assignments realize copy blocks iff their forms are equal.
    Nulls are canonicalized by minimizing over renamings, so collapsed
    (non-injective) assignments compare correctly.
    """
    env = dict(zip(t.const_vars, values))
    best = None
    for nperm in itertools.permutations(t.null_vars):
        nmap = {y: k for k, y in enumerate(nperm)}
        facts = frozenset(
            (
                a.rel,
                tuple(
                    ("n", nmap[v.name])
                    if isinstance(v, Var) and v.name in nmap
                    else ("c", env[v.name] if isinstance(v, Var) else ("#", v.text))
                    for v in a.args
                ),
            )
            for a in t.atoms
        )
        key = tuple(sorted(facts))
        if best is None or key < best:
            best = key
    return best


def side_condition(t: BlockType) -> SideCondition:
    """Order constraint making the type rigid without losing any block.

    Search over assignments of the constant variables into an ordered
    universe of |vars| values (every order pattern occurs there): while
    two distinct assignments satisfying the condition realize copies of
    each other, exclude the complete order pattern of the first one.
    Rigid types get `true`.
    """
    names = t.const_vars
    m = len(names)
    phi: Formula = TRUE
    if m <= 1:
        return phi
    universe = list(range(m))
    while True:
        witness = None
        first_of_form: dict = {}
        for values in itertools.product(universe, repeat=m):
            if not _order_formula_holds(phi, dict(zip(names, values))):
                continue
            form = _realized_block_form(t, values)
            prev = first_of_form.setdefault(form, values)
            if prev != values:
                witness = prev
                break
        if witness is None:
            return phi
        phi = conj([phi, Not(_order_type(names, witness))])


# ---------------------------------------------------------------------------
# Assembly.

def laconify(m: SchemaMapping, *, side_conditions: bool = True) -> SchemaMapping:
    """Logically equivalent mapping whose canonical solution is the core.

    The output antecedents contain certain[...] nodes referring to the
    (decomposed) input mapping; eliminate them with
    `dx.certain.eliminate_mapping` when a pure formula is needed.
    """
    if not mapping_certain_free(m):
        raise MappingError("laconify input must be certain[...]-free")
    md = decompose(m)
    _reject_consequent_constants(md)
    types = generate_block_types(md)
    tgds = []
    for t in types:
        ante = precondition(t, types, md)
        if side_conditions:
            ante = conj([ante, side_condition(t)])
        tgds.append(TGD(ante, t.null_vars, t.atoms))
    return SchemaMapping(m.source, m.target, tuple(tgds))
