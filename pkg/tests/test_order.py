import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import random_protocol
from racefree.errors import OrderError
from racefree.order import (
    CB_HB,
    HB_CB,
    EdgeLabel,
    EventPoint,
    apply_channel_rules,
    apply_propagation,
    check_isotone,
    derive_orders,
    detect_cycle,
    dump_order,
    happens_before,
    min_cycle,
    parse_order_dump,
    protocol_matching,
)
from racefree.protocol import ev, parse


def pt(text):
    return EventPoint.parse(text)


def event_edges(hb, label=None):
    return {(str(e.src.event), str(e.dst.event)) for e in hb.edges
            if e.src.event != e.dst.event and (label is None or e.label is label)}


@pytest.fixture
def simple(data):
    return parse((data / "simple.gp").read_text())


def test_simple_orders(simple):
    hb, cb = derive_orders(simple)
    assert {str(t) for t in cb.triples} == {"A.1 -c-> B.1", "B.2 -c-> C.2"}
    assert event_edges(hb) == {("B.1", "B.2")}
    assert hb.event_hb(ev("B.1"), ev("B.2"))
    assert not hb.event_hb(ev("A.1"), ev("C.2"))
    assert len(hb.nodes) == 8
    assert detect_cycle(hb) is None


def test_program_order_needs_shared_party():
    hb, _ = derive_orders(parse("A -c-> B ; C -d-> D"))
    assert event_edges(hb) == set()


def test_par_gives_no_program_order():
    hb, _ = derive_orders(parse("A -c-> B || A -d-> C"))
    assert event_edges(hb) == set()


def test_guard_edge(data):
    hb, _ = derive_orders(parse((data / "simple_guarded.gp").read_text()))
    assert event_edges(hb, EdgeLabel.GUARD) == {("A.1", "B.2"), ("B.1", "C.2")}


def test_propagation_rules(simple):
    hb, cb = derive_orders(simple)
    fwd = apply_propagation(hb, cb, CB_HB)
    assert event_edges(fwd, EdgeLabel.DERIVED) == {("A.1", "B.2")}
    assert not fwd.unsound_derivation
    back = apply_propagation(hb, cb, HB_CB)
    assert event_edges(back, EdgeLabel.DERIVED) == {("B.1", "C.2")}
    assert back.unsound_derivation


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([CB_HB, HB_CB]))
def test_propagation_idempotent(seed, rule):
    g = random_protocol(random.Random(seed))
    hb, cb = derive_orders(g)
    once = apply_propagation(hb, cb, rule)
    assert apply_propagation(once, cb, rule).edges == once.edges


def test_unknown_rule(simple):
    hb, cb = derive_orders(simple)
    with pytest.raises(ValueError):
        apply_propagation(hb, cb, "sideways")


def test_channel_rules(simple):
    hb, _ = derive_orders(simple)
    out = apply_channel_rules(hb, protocol_matching(simple), {"c": 1})
    chan = {(str(e.src), str(e.dst)) for e in out.edges if e.label is EdgeLabel.CHANNEL}
    cap = {(str(e.src), str(e.dst)) for e in out.edges if e.label is EdgeLabel.CAPACITY}
    assert chan == {("A.1.S.s", "B.1.R.c"), ("B.2.S.s", "C.2.R.c")}
    assert cap == {("B.1.R.s", "B.2.S.c")}
    assert all(e.label_text == "channel(c)" for e in out.edges if e.label is EdgeLabel.CHANNEL)


def test_channel_rules_need_numeric_capacity(simple):
    hb, _ = derive_orders(simple)
    with pytest.raises(OrderError):
        apply_channel_rules(hb, protocol_matching(simple), {"c": None})


def test_deadlock_cycle(data):
    hb, _ = derive_orders(parse((data / "guarded_deadlock.gp").read_text()))
    assert [str(p) for p in detect_cycle(hb)] == ["B.1.R.s", "B.1.R.c", "C.2.R.s", "C.2.R.c"]


def test_happens_before_unknown_point(simple):
    hb, _ = derive_orders(simple)
    with pytest.raises(OrderError):
        happens_before(hb, pt("A.1.S.s"), pt("Z.9.S.s"))


def test_isotone():
    _, cb = derive_orders(parse("A -c-> B ; A -c-> C"))
    a1, a2, b1, c2 = ev("A.1"), ev("A.2"), ev("B.1"), ev("C.2")
    assert check_isotone(cb, {(a1, a2)}, {(b1, c2)}).ok
    res = check_isotone(cb, {(a1, a2)}, set())
    assert not res.ok and res.violations == ((a1, a2),)


def test_dump_roundtrip(simple):
    hb, cb = derive_orders(simple)
    hb = apply_propagation(hb, cb, HB_CB)
    hb = apply_channel_rules(hb, protocol_matching(simple), {"c": 2})
    text = dump_order(hb)
    assert text.startswith("# unsound-derivation\n")
    back = parse_order_dump(text)
    assert back == hb
    assert dump_order(back) == text


# -- cycle detection against networkx --------------------------------------

@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8), st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=20))
def test_min_cycle_agrees_with_networkx(n, raw):
    nodes = list(range(n))
    edges = {(a % n, b % n) for a, b in raw}
    succ = {v: sorted(b for a, b in edges if a == v) for v in nodes}
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    g.add_edges_from(edges)
    cyc = min_cycle(nodes, succ)
    if nx.is_directed_acyclic_graph(g):
        assert cyc is None
        return
    assert cyc is not None
    assert all((a, b) in edges for a, b in zip(cyc, cyc[1:] + cyc[:1]))
    assert len(set(cyc)) == len(cyc)
    shortest = min(len(c) for c in nx.simple_cycles(g))
    assert len(cyc) == shortest


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_detect_cycle_agrees_with_networkx_on_protocols(seed):
    g = random_protocol(random.Random(seed), guard_count=seed % 3)
    hb, _ = derive_orders(g)
    graph = nx.DiGraph([(e.src, e.dst) for e in hb.edges])
    assert (detect_cycle(hb) is None) == nx.is_directed_acyclic_graph(graph)
