import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import random_protocol
from racefree.errors import ProtocolError, ProtocolSyntaxError
from racefree.protocol import (
    EMP,
    Channel,
    Guard,
    Par,
    Seq,
    TransIndex,
    Transmission,
    congruent,
    ev,
    index_transmissions,
    leaf_paths,
    normalize,
    parse,
    parties,
    render,
    seq_ordered,
    transmissions,
    validate,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rand(seed, **kw):
    return random_protocol(random.Random(seed), **kw)


# -- parsing ---------------------------------------------------------------

def test_parse_simple(data):
    g = parse("A -c-> B ; B -c-> C")
    assert g == Seq(Transmission("A", Channel("c"), "B", TransIndex((1,))),
                    Transmission("B", Channel("c"), "C", TransIndex((2,))))
    assert parties(g) == ["A", "B", "C"]


def test_par_binds_looser_than_seq():
    g = parse("A -c-> B ; B -d-> C || D -e-> E")
    assert isinstance(g, Par)
    assert isinstance(g.left, Seq)


def test_left_associative_seq():
    g = parse("A -c-> B ; B -c-> C ; C -c-> A")
    assert isinstance(g.left, Seq) and isinstance(g.right, Transmission)


def test_capacity_header_and_inline():
    g = parse("chan c cap 2  # buffered\nA -c-> B ; B -d:0-> A")
    caps = {t.channel.name: t.channel.capacity for t in transmissions(g)}
    assert caps == {"c": 2, "d": 0}
    assert render(g) == "A -c:2-> B ; B -d:0-> A"


def test_any_capacity_renders_bare():
    assert render(parse("A -c:any-> B")) == "A -c-> B"


def test_guards_and_comments():
    g = parse("A -c-> B # first\n; [A.1 < B.2] ; B -c-> C")
    assert Guard(ev("A.1"), ev("B.2")) in list(_guards(g))


def _guards(g):
    from racefree.protocol import guards
    return guards(g)


@pytest.mark.parametrize("text, line, col", [
    ("A -c-> A", 1, 1),
    ("A -c-> B ;; B -c-> C", 1, 11),
    ("A -c-> B ; [A.1 < Z.9]", 1, 12),
    ("A -c-> B ; (B -d-> C", 1, 21),
    ("chan c cap 2\nA -c:1-> B", 2, 3),
])
def test_syntax_errors_are_located(text, line, col):
    with pytest.raises(ProtocolSyntaxError) as exc:
        parse(text, "x.gp")
    assert (exc.value.line, exc.value.col) == (line, col)
    assert str(exc.value).startswith(f"x.gp:{line}:{col}:")


def test_emp_parses():
    assert parse("emp") == EMP
    assert render(EMP) == "emp"


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_render_parse_roundtrip(seed):
    g = rand(seed, guard_count=seed % 3)
    assert parse(render(g)) == g


# -- normalisation ---------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(seeds)
def test_normalize_idempotent(seed):
    g = rand(seed, guard_count=seed % 3)
    n = normalize(g)
    assert normalize(n) == n
    assert congruent(g, n)


def test_normalize_drops_emp_and_sorts_par():
    a = parse("C -d-> D || A -c-> B")
    assert render(normalize(Seq(EMP, a))) == "A -c-> B || C -d-> D"


def test_normalize_reassociates():
    t = transmissions(parse("A -c-> B ; B -c-> C ; C -c-> A"))
    right = Seq(t[0], Seq(t[1], t[2]))
    left = Seq(Seq(t[0], t[1]), t[2])
    assert normalize(right) == normalize(left) == left


def test_index_idempotent():
    g = Seq(Transmission("A", Channel("c"), "B"), Transmission("B", Channel("c"), "C"))
    once = index_transmissions(g)
    assert index_transmissions(once) == once
    assert [str(t.index) for t in transmissions(once)] == ["1", "2"]


def test_index_rejects_dangling_guard():
    g = Seq(Transmission("A", Channel("c"), "B"), Guard(ev("A.1"), ev("C.7")))
    with pytest.raises(ProtocolError):
        index_transmissions(g)


# -- sequential ordering ---------------------------------------------------

def _seq_oracle(g):
    """i before j iff some ``;`` node has i in its left subtree and j in its right,
    and no ``||`` node separates them below that point."""
    out = set()

    def idx(n):
        return {t.index for t in transmissions(n)}

    def go(n):
        if isinstance(n, Seq):
            out.update((i, j) for i in idx(n.left) for j in idx(n.right))
        if isinstance(n, (Seq, Par)):
            go(n.left)
            go(n.right)

    go(g)
    return out


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_seq_ordered_matches_subtree_oracle(seed):
    g = rand(seed, par_prob=0.35)
    assert seq_ordered(g) == _seq_oracle(g)


def test_seq_ordered_par():
    g = parse("A -c-> B ; (B -d-> C || D -e-> A) ; C -c-> D")
    got = {(str(a), str(b)) for a, b in seq_ordered(g)}
    assert got == {("1", "2"), ("1", "3"), ("1", "4"), ("2", "4"), ("3", "4")}


def test_leaf_paths_cover_every_leaf():
    g = parse("A -c-> B ; [A.1 < B.1] ; B -c-> C")
    assert len(leaf_paths(g)) == 3


# -- validation ------------------------------------------------------------

def codes(g):
    return sorted(d.code for d in validate(g))


def test_validate_ok(data):
    assert validate(parse((data / "simple.gp").read_text())) == []


def test_validate_par_endpoint_conflict(data):
    g = parse((data / "not_well_formed.gp").read_text())
    assert "par-endpoint-conflict" in codes(g)


def test_validate_programmatic_errors():
    t = Transmission("A", Channel("c", 1), "A", TransIndex((1,)))
    u = Transmission("A", Channel("c", 2), "B", TransIndex((1,)))
    v = Transmission("B", Channel("c"), "C")
    assert codes(Seq(Seq(t, u), v)) == ["capacity-conflict", "capacity-conflict", "duplicate-index",
                                        "self-transmission", "unindexed"]


def test_validate_unresolved_guard():
    t = Transmission("A", Channel("c"), "B", TransIndex((1,)))
    assert codes(Seq(t, Guard(ev("A.1"), ev("Q.3")))) == ["unresolved-guard"]
