import pytest
from helpers import (
    brute_homomorphism,
    brute_is_core,
    brute_isomorphic,
    inst,
)
from hypothesis import given, settings, strategies as st

from dx.model import (
    Const,
    Fact,
    FreshNull,
    Instance,
    MappingError,
    Schema,
    SkolemNull,
    blocks,
    compute_core,
    fact_graph,
    find_homomorphism,
    format_facts,
    instances_isomorphic,
    is_core,
    parse_facts,
)
from dx.verify import random_source_instance

S2 = Schema({"S": 2})
ST = Schema({"S": 2, "T": 2})
R2 = Schema({"R": 2})


def test_const_rejects_reserved_prefix():
    with pytest.raises(ValueError):
        Const("@x")
    with pytest.raises(ValueError):
        Const("")


def test_instance_checks_arity():
    with pytest.raises(MappingError):
        Instance(S2, [Fact("S", (Const("a"),))])
    with pytest.raises(MappingError):
        Instance(S2, [Fact("T", (Const("a"), Const("b")))])


def test_blocks_examples():
    i = inst(ST, ("S", "a", FreshNull(1)), ("T", "b", FreshNull(1)), ("S", "c", "c"))
    comps = blocks(i)
    assert sorted(len(b.facts) for b in comps) == [1, 2]
    assert frozenset().union(*(b.facts for b in comps)) == i.facts
    assert blocks(Instance(ST, [])) == []
    # two facts with distinct nulls stay separate components
    j = inst(R2, ("R", "a", FreshNull(1)), ("R", "a", FreshNull(2)))
    assert [len(b.facts) for b in blocks(j)] == [1, 1]


def test_fact_graph_edges():
    i = inst(ST, ("S", "a", FreshNull(1)), ("T", "b", FreshNull(1)), ("S", "c", "c"))
    g = fact_graph(i)
    assert len(g.nodes) == 3
    assert len(g.edges) == 1


def test_find_homomorphism_examples():
    i = inst(S2, ("S", "a", FreshNull(1)))
    j = inst(S2, ("S", "a", "b"))
    h = find_homomorphism(i, j)
    assert h is not None and h.mapping[FreshNull(1)] == Const("b")
    assert find_homomorphism(i, inst(S2, ("S", "b", "c"))) is None

    n, m1, m2 = FreshNull(5), FreshNull(11), FreshNull(12)
    i2 = inst(S2, ("S", "a", n), ("S", "b", n))
    j2 = inst(S2, ("S", "a", m1), ("S", "b", m1), ("S", "a", m2))
    h2 = find_homomorphism(i2, j2)
    assert h2.mapping[n] == m1


def test_homomorphism_image_is_contained():
    i = inst(S2, ("S", "a", FreshNull(1)))
    j = inst(S2, ("S", "a", "b"))
    h = find_homomorphism(i, j)
    assert h.apply_instance(i).facts <= j.facts


def test_compute_core_examples():
    ground = inst(S2, ("S", "a", "b"), ("S", "b", "c"))
    core, retr = compute_core(ground)
    assert core == ground
    assert all(retr(v) == v for v in ground.dom)

    j = inst(R2, ("R", "a", FreshNull(1)), ("R", "a", FreshNull(2)))
    core, retr = compute_core(j)
    assert len(core.facts) == 1
    assert not is_core(j)
    assert is_core(core)
    for f in j.facts:
        assert retr.apply_fact(f) in core.facts


def test_compute_core_total_relation_fixture():
    # chase of Rxy -> exists z (Sxz & Syz) over a total 4-element R,
    # built directly: the core keeps one null per unordered pair.
    consts = [Const(c) for c in "abcd"]
    facts = []
    for x in consts:
        for y in consts:
            n = SkolemNull("f", (x, y))
            facts += [Fact("S", (x, n)), Fact("S", (y, n))]
    j = Instance(S2, facts)
    assert len(j.facts) == 28 and len(j.nulls) == 16
    core, retr = compute_core(j)
    assert len(core.nulls) == 6
    assert len(core.facts) == 12
    # each surviving null is shared by exactly two S-facts with distinct
    # constant endpoints
    for n in core.nulls:
        ends = {f.args[0] for f in core.facts if f.args[1] == n}
        assert len(ends) == 2
    assert all(retr(v) == v for v in core.dom)
    assert is_core(core)


def test_is_core_examples():
    assert is_core(inst(S2, ("S", "a", "b")))
    assert not is_core(inst(R2, ("R", "a", FreshNull(1)), ("R", "a", FreshNull(2))))
    # chain block: R2(x,y), R2(z,y), R1(z,u) with x constant
    sch = Schema({"R1": 2, "R2": 2})
    y, z, u = FreshNull(1), FreshNull(2), FreshNull(3)
    t2 = inst(sch, ("R2", "a", y), ("R2", z, y), ("R1", z, u))
    assert is_core(t2)


def test_isomorphic_examples():
    assert instances_isomorphic(
        inst(S2, ("S", "a", FreshNull(1))), inst(S2, ("S", "a", FreshNull(9)))
    )
    assert not instances_isomorphic(
        inst(S2, ("S", "a", FreshNull(1))), inst(S2, ("S", "b", FreshNull(1)))
    )
    n, m1, m2 = FreshNull(5), FreshNull(11), FreshNull(12)
    assert not instances_isomorphic(
        inst(S2, ("S", "a", n), ("S", "b", n)),
        inst(S2, ("S", "a", m1), ("S", "b", m2)),
    )


def test_isomorphism_requires_matching_ground_facts():
    assert not instances_isomorphic(
        inst(S2, ("S", "a", "a")), inst(S2, ("S", "b", "b"))
    )


# -- randomized cross-checks against the brute-force oracles ----------------

def _random_target_instance(seed):
    import random

    rng = random.Random(f"ti:{seed}")
    values = [Const(c) for c in "abc"] + [FreshNull(i) for i in (1, 2, 3)]
    facts = [
        Fact("S", (rng.choice(values), rng.choice(values)))
        for _ in range(rng.randint(0, 5))
    ]
    return Instance(S2, facts)


@pytest.mark.parametrize("seed", range(120))
def test_homomorphism_matches_brute_force(seed):
    i = _random_target_instance(f"a{seed}")
    j = _random_target_instance(f"b{seed}")
    ours = find_homomorphism(i, j)
    brute = brute_homomorphism(i, j)
    assert (ours is None) == (brute is None)
    if ours is not None:
        assert ours.apply_instance(i).facts <= j.facts


@pytest.mark.parametrize("seed", range(120))
def test_core_and_iso_match_brute_force(seed):
    j = _random_target_instance(seed)
    assert is_core(j) == brute_is_core(j)
    core, retr = compute_core(j)
    assert is_core(core)
    assert core.facts <= j.facts
    assert all(retr(v) == v for v in core.dom)
    assert {retr.apply_fact(f) for f in j.facts} <= core.facts
    # the core is homomorphically equivalent to the original
    assert find_homomorphism(core, j) is not None
    assert find_homomorphism(j, core) is not None

    k = _random_target_instance(f"x{seed}")
    assert instances_isomorphic(j, k) == brute_isomorphic(j, k)


@pytest.mark.parametrize("seed", range(60))
def test_blocks_partition_and_core_invariants(seed):
    j = _random_target_instance(f"p{seed}")
    comps = blocks(j)
    if comps:
        assert frozenset().union(*(b.facts for b in comps)) == j.facts
    assert sum(len(b.facts) for b in comps) == len(j.facts)
    # homomorphic equivalence iff isomorphic cores
    k = _random_target_instance(f"q{seed}")
    both_ways = (
        find_homomorphism(j, k) is not None and find_homomorphism(k, j) is not None
    )
    cores_iso = instances_isomorphic(compute_core(j)[0], compute_core(k)[0])
    assert both_ways == cores_iso


def test_is_core_invariant_under_renaming():
    j = inst(S2, ("S", "a", FreshNull(1)), ("S", "a", FreshNull(2)))
    k = inst(S2, ("S", "a", FreshNull(7)), ("S", "a", FreshNull(9)))
    assert instances_isomorphic(j, k)
    assert is_core(j) == is_core(k)


# -- fact files --------------------------------------------------------------

_values = st.recursive(
    st.one_of(
        st.text(
            alphabet="abcxyz_09' ",
            min_size=1,
            max_size=6,
        ).filter(lambda t: not t.startswith("@")).map(Const),
        st.integers(min_value=1, max_value=99).map(FreshNull),
    ),
    lambda children: st.tuples(children, children).map(
        lambda args: SkolemNull("f1_2", args)
    ),
    max_leaves=4,
)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(_values, _values), max_size=5))
def test_fact_file_round_trip(pairs):
    i = Instance(S2, [Fact("S", pair) for pair in pairs])
    assert parse_facts(format_facts(i), S2) == i


def test_fact_file_rejects_garbage():
    from dx.model import ParseError

    with pytest.raises(ParseError):
        parse_facts("S(a b).", S2)
    with pytest.raises(ParseError):
        parse_facts("S(a).", S2)
    with pytest.raises(ParseError):
        parse_facts("Q(a, b).", S2)


def test_fact_file_comments_and_quotes():
    text = "# header\nS('hello world', ?N3). # trailing\n"
    i = parse_facts(text, S2)
    assert i.facts == frozenset({Fact("S", (Const("hello world"), FreshNull(3)))})


def test_random_source_instance_deterministic():
    a = random_source_instance(R2, 7, 4, 8)
    b = random_source_instance(R2, 7, 4, 8)
    assert a == b
    assert random_source_instance(R2, 1, 4, 0).facts == frozenset()
    small = random_source_instance(R2, 2, 4, 16)
    assert all(f.rel == "R" for f in small.facts)
    assert len({v.text for v in small.constants}) <= 4
