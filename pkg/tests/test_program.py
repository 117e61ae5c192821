import pytest

from racefree.errors import ProgramError, ProgramSyntaxError, RaceFreeError
from racefree.program import (
    RecvStmt,
    SendStmt,
    extract_parties,
    parse_program,
    parse_program_file,
    render_program,
)

HEAD = "package main\nvar c = make(chan int, 1)\n"


def steps(prog):
    return {t.party: [str(s) for s in t.steps] for t in extract_parties(prog)}


def test_guarded_program(data):
    prog = parse_program_file(data / "guarded.go")
    assert prog.capacities() == {"c": 2, "d": 0, "e": 0}
    assert steps(prog) == {"A": ["c <- 1", "d <- 0"], "B": ["<-c", "<-d", "e <- 0", "c <- 2"],
                           "C": ["<-e", "<-c"]}


def test_locations(data):
    prog = parse_program_file(data / "guarded_failed.go")
    a = next(t for t in extract_parties(prog) if t.party == "A")
    assert str(a.steps[1].loc) == f"{data / 'guarded_failed.go'}:15:2"


def test_unbuffered_default_and_binding():
    prog = parse_program("package main\nvar c = make(chan int)\nfunc main() { go A(); go B() }\n"
                         "func A() { c <- 1 }\nfunc B() { x := <-c }\n")
    assert prog.capacities() == {"c": 0}
    b = next(t for t in extract_parties(prog) if t.party == "B")
    assert isinstance(b.steps[0], RecvStmt) and b.steps[0].bind == "x"


def test_helpers_are_inlined():
    prog = parse_program(HEAD + "func main() { go A()\n go B() }\nfunc A() { h() }\n"
                         "func h() { c <- 1 }\nfunc B() { <-c }\n")
    assert steps(prog) == {"A": ["c <- 1"], "B": ["<-c"]}


def test_comments_and_imports():
    prog = parse_program('package main\nimport "fmt"\n/* block */\nvar c = make(chan int, 1)\n'
                         "func main() { go A() }  // spawn\nfunc A() { c <- 1 }\n")
    assert steps(prog) == {"A": ["c <- 1"]}


@pytest.mark.parametrize("body, line, col, msg", [
    ("func main() { go A() }\nfunc A() { for { c <- 1 } }\n", 4, 12, "loops"),
    ("func main() { go A() }\nfunc A() { c <- 1; A() }\n", 4, 20, "recursive"),
    ("func main() { c <- 1 }\n", 3, 15, "main must not communicate"),
    ("func main() { go A() }\nfunc A() { z <- 1 }\n", 4, 12, "not declared"),
])
def test_rejections(body, line, col, msg):
    with pytest.raises(ProgramError) as exc:
        extract_parties(parse_program(HEAD + body, "p.go"))
    assert (exc.value.line, exc.value.col) == (line, col)
    assert msg in str(exc.value)


@pytest.mark.parametrize("name", ["sumtype.go", "sumtype_sync.go"])
def test_out_of_subset_programs(data, name):
    with pytest.raises(RaceFreeError) as exc:
        parse_program_file(data / name)
    assert "type declarations are not supported" in str(exc.value)


def test_syntax_error():
    with pytest.raises(ProgramSyntaxError):
        parse_program(HEAD + "func main() { go A( }\n")


def test_render_program_roundtrip():
    src = render_program({"c": 1}, {"A": ["c <- 0"], "B": ["<-c"]})
    prog = parse_program(src)
    assert steps(prog) == {"A": ["c <- 0"], "B": ["<-c"]}
    assert isinstance(extract_parties(prog)[0].steps[0], SendStmt)
