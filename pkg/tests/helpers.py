"""Shared fixtures: the example mapping pairs, small builders, and
independent brute-force oracles used to cross-check the engine.
"""

from __future__ import annotations

import itertools

from dx.model import Const, Fact, Instance, Schema
from dx.parser import parse_mapping

# Non-laconic mappings paired with hand-written equivalent laconic ones.
PAIR_SOURCES = {
    "double_witness": (
        """source P/1. target R/2.
           tgd: P(x) -> exists y, z: R(x,y) & R(x,z).""",
        """source P/1. target R/2.
           tgd: P(x) -> exists y: R(x,y).""",
    ),
    "loop_absorbs_null": (
        """source P/1. target R/2.
           tgd: P(x) -> exists y: R(x,y).
           tgd: P(x) -> R(x,x).""",
        """source P/1. target R/2.
           tgd: P(x) -> R(x,x).""",
    ),
    "view_overlap": (
        """source R/2, P/1. target S/2.
           tgd: R(x,y) -> S(x,y).
           tgd: P(x) -> exists y: S(x,y).""",
        """source R/2, P/1. target S/2.
           tgd: R(x,y) -> S(x,y).
           tgd: P(x) & !(exists y: R(x,y)) -> exists y: S(x,y).""",
    ),
    "diagonal_overlap": (
        """source R/2. target S/3.
           tgd: R(x,y) -> exists z: S(x,y,z).
           tgd: R(x,x) -> S(x,x,x).""",
        """source R/2. target S/3.
           tgd: R(x,y) & !(x = y) -> exists z: S(x,y,z).
           tgd: R(x,x) -> S(x,x,x).""",
    ),
    # The orientation-breaking antecedent needs a guard on the reflexive
    # case: firing at (b,b) next to a fired (a,b) would add a foldable
    # one-fact block, so x = y only counts when x has no other partner.
    "symmetric_join": (
        """source R/2. target S/2.
           tgd: R(x,y) -> exists z: S(x,z) & S(y,z).""",
        """source R/2. target S/2.
           tgd: (R(x,y) | R(y,x)) & (x < y | x = y & !(exists w: !(w = x) & (R(x,w) | R(w,x))))
                -> exists z: S(x,z) & S(y,z).""",
    ),
}

# Two overlapping rules; its three block types have preconditions
# equivalent to P(x), Q(x) & !P(x), and Q(x) & P(x).
OVERLAP_SOURCE = """
source P/1, Q/1.
target R1/2, R2/2.
tgd: P(x) -> exists y: R1(x,y).
tgd: Q(x) -> exists y, z, u: R2(x,y) & R2(z,y) & R1(z,u).
"""

# One shared null between two target relations plus a ground rule.
SPLIT_PAIR_SOURCE = """
source R/2.
target S/2, T/2.
tgd: R(x1,x2) -> exists y: S(x1,y) & T(x2,y).
tgd: R(x,x) -> S(x,x).
"""


def pair(name):
    left, right = PAIR_SOURCES[name]
    return parse_mapping(left), parse_mapping(right)


def overlap_mapping():
    return parse_mapping(OVERLAP_SOURCE)


def split_pair_mapping():
    return parse_mapping(SPLIT_PAIR_SOURCE)


def star_blowup_mapping(k: int):
    """k unary copy rules plus one star-shaped rule; generates one block
    type per subset of {1..k} plus k ground types."""
    src = "source Q/1, " + ", ".join(f"P{i}/1" for i in range(1, k + 1)) + "."
    tgt = "target R/2, " + ", ".join(f"Pp{i}/1" for i in range(1, k + 1)) + "."
    tgds = [f"tgd: P{i}(x) -> Pp{i}(x)." for i in range(1, k + 1)]
    body = " & ".join(
        ["R(x,y0)"] + [f"R(y{i},y0) & Pp{i}(y{i})" for i in range(1, k + 1)]
    )
    ys = ", ".join(f"y{i}" for i in range(k + 1))
    tgds.append(f"tgd: Q(x) -> exists {ys}: {body}.")
    return parse_mapping("\n".join([src, tgt] + tgds))


def inst(schema: Schema, *facts) -> Instance:
    """Facts as (rel, arg, arg, ...) with strings for constants."""
    out = []
    for rel, *args in facts:
        out.append(
            Fact(rel, tuple(Const(a) if isinstance(a, str) else a for a in args))
        )
    return Instance(schema, out)


def total_relation_instance(schema: Schema, rel: str, consts) -> Instance:
    values = [Const(c) for c in consts]
    return Instance(
        schema, [Fact(rel, (u, v)) for u in values for v in values]
    )


def all_instances(schema: Schema, consts):
    """Every instance over the given constants (exhaustive)."""
    values = [Const(c) for c in consts]
    slots = []
    for rel, arity in schema.rels:
        for args in itertools.product(values, repeat=arity):
            slots.append(Fact(rel, args))
    for bits in range(2 ** len(slots)):
        yield Instance(schema, [f for i, f in enumerate(slots) if bits >> i & 1])


# ---------------------------------------------------------------------------
# Side-condition oracles.

def type_copies(t, a_vals, b_vals) -> bool:
    """Blocks t(a_vals) and t(b_vals) are copies (same facts up to a
    renaming of nulls)."""
    from dx.lang import Var
    from dx.model import FreshNull, instances_isomorphic

    def build(vals, offset):
        env = dict(zip(t.const_vars, vals))
        env.update({y: FreshNull(offset + k + 1) for k, y in enumerate(t.null_vars)})
        rels = {a.rel: len(a.args) for a in t.atoms}
        facts = [
            Fact(
                a.rel,
                tuple(env[v.name] if isinstance(v, Var) else v for v in a.args),
            )
            for a in t.atoms
        ]
        return Instance(Schema(rels), facts)

    return instances_isomorphic(build(a_vals, 0), build(b_vals, 10))


def check_rigid_and_safe(t) -> list:
    """Brute-force check of a type's side condition over |const_vars|
    ordered constants; returns a list of violation descriptions."""
    from dx.laconify import _order_formula_holds, side_condition

    phi = side_condition(t)
    m = len(t.const_vars)
    consts = [Const(f"c{i}") for i in range(m)]

    def sat(vals):
        return _order_formula_holds(
            phi, {v: c.text for v, c in zip(t.const_vars, vals)}
        )

    assignments = list(itertools.product(consts, repeat=m))
    violations = []
    for a_vals in assignments:
        for b_vals in assignments:
            if a_vals != b_vals and sat(a_vals) and sat(b_vals):
                if type_copies(t, a_vals, b_vals):
                    violations.append(f"not rigid: {a_vals} vs {b_vals}")
    for a_vals in assignments:
        if not any(
            sat(b_vals) and type_copies(t, a_vals, b_vals) for b_vals in assignments
        ):
            violations.append(f"not safe: {a_vals}")
    return violations


# ---------------------------------------------------------------------------
# Brute-force oracles (independent of the kernel-based search paths).

def brute_homomorphism(i: Instance, j: Instance):
    """Exhaustive search over all null assignments."""
    nulls = i.nulls
    for combo in itertools.product(j.dom, repeat=len(nulls)):
        mapping = dict(zip(nulls, combo))

        def h(v):
            return mapping.get(v, v)

        if all(
            Fact(f.rel, tuple(h(a) for a in f.args)) in j.facts for f in i.facts
        ):
            return mapping
    return None


def brute_is_core(j: Instance) -> bool:
    """No endomorphism whose fact image misses a fact."""
    nulls = j.nulls
    for combo in itertools.product(j.dom, repeat=len(nulls)):
        mapping = dict(zip(nulls, combo))

        def h(v):
            return mapping.get(v, v)

        image = {Fact(f.rel, tuple(h(a) for a in f.args)) for f in j.facts}
        if image <= j.facts and image != j.facts:
            return False
    return True


def brute_isomorphic(i: Instance, j: Instance) -> bool:
    if len(i.facts) != len(j.facts) or len(i.nulls) != len(j.nulls):
        return False
    if set(i.constants) != set(j.constants):
        return False
    for perm in itertools.permutations(j.nulls):
        mapping = dict(zip(i.nulls, perm))

        def h(v):
            return mapping.get(v, v)

        image = {Fact(f.rel, tuple(h(a) for a in f.args)) for f in i.facts}
        if image == j.facts:
            return True
    return False
