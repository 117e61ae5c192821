import pytest

from racefree.errors import ProtocolError
from racefree.projection import (
    ProjectionContext,
    delegate,
    endpoints_of,
    project_all,
    project_endpoint,
    project_party,
    unproject,
)
from racefree.protocol import EMP, Guard, ev, parse, render


@pytest.fixture
def guarded(data):
    return parse((data / "simple_guarded.gp").read_text())


def test_per_party(guarded):
    ctx = ProjectionContext.for_protocol(guarded)
    got = {p: render(project_party(guarded, p, ctx)) for p in "ABC"}
    assert got == {
        "A": "c!A.1 ; guard(~g1, A.1) ; ~g1!A.1.1",
        "B": "c?B.1 ; ~g1?B.1.1 ; guard(~g1, B.2) ; guard(~g2, B.1) ; ~g2!B.1.2 ; c!B.2",
        "C": "~g2?C.1.2 ; guard(~g2, C.2) ; c?C.2",
    }


def test_per_endpoint(guarded):
    eps = {c: render(z) for c, z in project_all(guarded, "B").items()}
    assert eps == {"c": "?B.1 ; B.2!", "~g1": "?B.1.1 ; guard(B.2)", "~g2": "guard(B.1) ; B.1.2!"}


def test_endpoint_absent_is_emp(guarded):
    assert project_endpoint(project_party(guarded, "A"), "~g2") == EMP


def test_fresh_channels_are_unbuffered(guarded):
    ctx = ProjectionContext.for_protocol(guarded)
    assert [(c.name, c.capacity, c.fresh) for c in ctx.fresh_channels()] == [
        ("~g1", 0, True), ("~g2", 0, True)]
    assert ctx.plan_for_channel("~g2").guard == Guard(ev("B.1"), ev("C.2"))
    assert ctx.plan_for_channel("nope") is None


def test_receive_index_falls_back_when_rhs_is_earlier():
    g = parse("A -c-> B ; B -d-> C ; [C.2 < A.1]")
    plan = ProjectionContext.for_protocol(g).plan_for_channel("~g1")
    assert str(plan.send_index) == "2.1"
    assert str(plan.recv_index) == "1.1"


def test_same_party_guard_uses_existing_channel():
    g = parse("A -c-> B ; [A.1 < A.2] ; A -d-> C")
    ctx = ProjectionContext.for_protocol(g)
    assert ctx.fresh_channels() == []
    assert render(project_party(g, "A", ctx)) == "c!A.1 ; guard(d, A.1) ; d!A.2"
    assert render(project_party(g, "B", ctx)) == "c?B.1"


def test_par_is_kept():
    g = parse("A -c-> B || C -d-> A")
    assert render(project_party(g, "A")) == "c!A.1 || d?A.2"


def test_unknown_guard_context(guarded):
    other = ProjectionContext.for_protocol(parse("A -c-> B"))
    with pytest.raises(ProtocolError):
        project_party(guarded, "A", other)


def test_endpoints_of(guarded):
    assert list(endpoints_of(project_party(guarded, "B"))) == ["c", "~g1", "~g2"]


def test_unproject(guarded):
    res = unproject(project_all(guarded, "C"), "C")
    assert res.render() == "C: c:{?C.2} || ~g2:{?C.1.2 ; guard(C.2)}"
    assert not res.is_empty
    assert unproject({"c": EMP}, "C").render() == "C: emp"


def test_delegate():
    d = delegate("x", parse("A -x-> B"))
    assert render(d) == "<x: A -x-> B>"
