"""Front end for a small straight-line fragment of Go.

Accepted shape::

    package main
    var c = make(chan int, 2)     // package-level channels only
    func main() { go A(); go B() }
    func A() { c <- 1; x := <-c; <-c; helper() }

Loops, branches, ``select``, ``defer``, local channel creation, type and
method declarations are rejected with a located error.  Plain calls are
inlined; recursion is rejected.  Every spawned function that touches a
channel becomes a party named after the function.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .errors import ProgramError, ProgramSyntaxError


@dataclass(frozen=True)
class Loc:
    line: int
    col: int
    source: str | None = None

    def __str__(self) -> str:
        return f"{self.source + ':' if self.source else ''}{self.line}:{self.col}"


@dataclass(frozen=True)
class ChanDecl:
    name: str
    capacity: int
    loc: Loc


@dataclass(frozen=True)
class SendStmt:
    channel: str
    value: str
    loc: Loc

    def __str__(self) -> str:
        return f"{self.channel} <- {self.value}"


@dataclass(frozen=True)
class RecvStmt:
    channel: str
    bind: str | None
    loc: Loc

    def __str__(self) -> str:
        return f"{self.bind} := <-{self.channel}" if self.bind else f"<-{self.channel}"


@dataclass(frozen=True)
class SpawnStmt:
    func: str
    loc: Loc


@dataclass(frozen=True)
class CallStmt:
    func: str
    loc: Loc


Stmt = Union[SendStmt, RecvStmt, SpawnStmt, CallStmt]
ChanStmt = Union[SendStmt, RecvStmt]


@dataclass(frozen=True)
class FuncDecl:
    name: str
    body: tuple[Stmt, ...]
    loc: Loc


@dataclass
class Program:
    channels: dict[str, ChanDecl]
    funcs: dict[str, FuncDecl]
    source: str | None = None

    def capacities(self) -> dict[str, int]:
        return {n: d.capacity for n, d in self.channels.items()}


@dataclass(frozen=True)
class PartyTrace:
    party: str
    steps: tuple[ChanStmt, ...]

    def channels(self) -> list[str]:
        return list(dict.fromkeys(s.channel for s in self.steps))


# --------------------------------------------------------------------------
# lexing

_TOKEN_RE = re.compile(
    r"""
    (?P<nl>\n)
  | (?P<ws>[ \t\r]+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<string>"(?:\\.|[^"\\\n])*"|`[^`]*`)
  | (?P<number>\d+)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op><-|:=|\.\.\.|[-+*/%&|^!<>=.,;:(){}\[\]])
    """,
    re.VERBOSE | re.DOTALL,
)

_REJECTED = {
    "for": "loops", "if": "conditionals", "else": "conditionals", "switch": "switch statements",
    "select": "select statements", "defer": "defer", "goto": "goto", "return": "return statements",
    "break": "break", "continue": "continue", "type": "type declarations",
    "const": "constant declarations",
}


@dataclass
class _Tok:
    kind: str
    value: str
    line: int
    col: int


def _lex(text: str, source: str | None) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ProgramSyntaxError(f"unexpected character {text[pos]!r}", line, col, source)
        kind, val = m.lastgroup, m.group()
        if kind == "nl":
            toks.append(_Tok("nl", "\n", line, col))
        elif kind == "bcomment" and "\n" in val:
            toks.append(_Tok("nl", "\n", line, col))
        elif kind not in ("ws", "lcomment", "bcomment"):
            toks.append(_Tok(kind, val, line, col))
        nls = val.count("\n")
        if nls:
            line += nls
            line_start = pos + val.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# --------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self, toks: list[_Tok], source: str | None):
        self.toks = toks
        self.i = 0
        self.source = source

    def loc(self, t: _Tok) -> Loc:
        return Loc(t.line, t.col, self.source)

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, value: str) -> _Tok:
        t = self.next()
        if t.value != value:
            self.syntax(f"expected {value!r} but found {t.value or t.kind!r}", t)
        return t

    def ident(self) -> _Tok:
        t = self.next()
        if t.kind != "ident":
            self.syntax(f"expected an identifier but found {t.value or t.kind!r}", t)
        return t

    def syntax(self, msg: str, t: _Tok):
        raise ProgramSyntaxError(msg, t.line, t.col, self.source)

    def unsupported(self, msg: str, t: _Tok):
        raise ProgramError(msg, t.line, t.col, self.source)

    def skip_nl(self):
        while self.peek().kind == "nl" or self.peek().value == ";":
            self.i += 1

    def end_stmt(self):
        t = self.peek()
        if t.kind in ("nl", "eof") or t.value in (";", "}"):
            if t.value == ";" or t.kind == "nl":
                self.i += 1
            return
        self.syntax(f"unexpected {t.value!r} after statement", t)

    def program(self) -> Program:
        self.skip_nl()
        self.expect("package")
        name = self.ident()
        if name.value != "main":
            self.unsupported("only `package main` is supported", name)
        self.end_stmt()
        chans: dict[str, ChanDecl] = {}
        funcs: dict[str, FuncDecl] = {}
        while True:
            self.skip_nl()
            t = self.peek()
            if t.kind == "eof":
                break
            if t.value == "import":
                self.import_decl()
            elif t.value == "var":
                d = self.chan_decl()
                if d.name in chans:
                    self.unsupported(f"channel {d.name} declared twice", t)
                chans[d.name] = d
            elif t.value == "func":
                f = self.func_decl()
                if f.name in funcs:
                    self.unsupported(f"function {f.name} declared twice", t)
                funcs[f.name] = f
            elif t.value in _REJECTED:
                self.unsupported(f"{_REJECTED[t.value]} are not supported", t)
            else:
                self.syntax(f"unexpected {t.value!r} at top level", t)
        return Program(chans, funcs, self.source)

    def import_decl(self):
        self.next()
        if self.peek().value == "(":
            while self.next().value != ")":
                if self.peek().kind == "eof":
                    self.syntax("unterminated import block", self.peek())
        else:
            s = self.next()
            if s.kind != "string":
                self.syntax("expected an import path", s)
        self.end_stmt()

    def chan_decl(self) -> ChanDecl:
        self.expect("var")
        name = self.ident()
        self.expect("=")
        mk = self.ident()
        if mk.value != "make":
            self.unsupported("package-level variables must be channels created with make", mk)
        self.expect("(")
        self.expect("chan")
        depth = 0
        cap = 0
        while True:
            t = self.next()
            if t.kind == "eof":
                self.syntax("unterminated make(...)", t)
            if t.value in "([{":
                depth += 1
            elif t.value in ")]}":
                if depth == 0 and t.value == ")":
                    break
                depth -= 1
            elif t.value == "," and depth == 0:
                c = self.next()
                if c.kind != "number":
                    self.unsupported("channel capacity must be an integer literal", c)
                cap = int(c.value)
                self.expect(")")
                break
        self.end_stmt()
        return ChanDecl(name.value, cap, self.loc(name))

    def func_decl(self) -> FuncDecl:
        kw = self.expect("func")
        if self.peek().value == "(":
            self.unsupported("methods are not supported", self.peek())
        name = self.ident()
        self.expect("(")
        t = self.next()
        if t.value != ")":
            self.unsupported("functions must not take parameters", t)
        if self.peek().value != "{":
            self.unsupported("functions must not return values", self.peek())
        self.expect("{")
        body = []
        while True:
            self.skip_nl()
            if self.peek().value == "}":
                self.next()
                break
            if self.peek().kind == "eof":
                self.syntax(f"unterminated body of {name.value}", self.peek())
            body.append(self.stmt())
        self.end_stmt()
        return FuncDecl(name.value, tuple(body), self.loc(kw))

    def stmt(self) -> Stmt:
        t = self.peek()
        loc = self.loc(t)
        if t.value in _REJECTED:
            self.unsupported(f"{_REJECTED[t.value]} are not supported", t)
        if t.value == "go":
            self.next()
            f = self.ident()
            self.expect("(")
            self.expect(")")
            self.end_stmt()
            return SpawnStmt(f.value, loc)
        if t.value == "<-":
            self.next()
            c = self.ident()
            self.end_stmt()
            return RecvStmt(c.value, None, loc)
        if t.value == "var" and self.peek(2).value == "=" and self.peek(3).value == "<-":
            self.next()
            x = self.ident()
            self.next()
            self.next()
            c = self.ident()
            self.end_stmt()
            return RecvStmt(c.value, x.value, loc)
        if t.kind == "ident":
            nxt = self.peek(1)
            if nxt.value == "(" and self.peek(2).value == ")":
                self.i += 3
                self.end_stmt()
                return CallStmt(t.value, loc)
            if nxt.value == "<-":
                self.i += 2
                value = self.expr_text()
                return SendStmt(t.value, value, loc)
            if nxt.value in (":=", "=") and self.peek(2).value == "<-":
                self.i += 3
                c = self.ident()
                self.end_stmt()
                return RecvStmt(c.value, t.value, loc)
            if nxt.value == ":=" and self.peek(2).value == "make":
                self.unsupported("channels must be declared at package level", t)
        self.unsupported(f"unsupported statement starting with {t.value!r}", t)
        raise AssertionError

    def expr_text(self) -> str:
        parts = []
        depth = 0
        while True:
            t = self.peek()
            if t.kind == "eof" or (depth == 0 and (t.kind == "nl" or t.value in (";", "}"))):
                break
            if t.value == "<-":
                self.unsupported("channel operations inside expressions are not supported", t)
            depth += t.value in "([{"
            depth -= t.value in ")]}" and depth > 0
            parts.append(t.value)
            self.next()
        if not parts:
            self.syntax("missing value in send", self.peek())
        self.end_stmt()
        return "".join(parts)


def parse_program(text: str, source: str | None = None) -> Program:
    prog = _Parser(_lex(text, source), source).program()
    for f in prog.funcs.values():
        for s in f.body:
            if isinstance(s, (SendStmt, RecvStmt)) and s.channel not in prog.channels:
                raise ProgramError(f"channel {s.channel} is not declared", s.loc.line, s.loc.col,
                                   source)
            if isinstance(s, (SpawnStmt, CallStmt)) and s.func not in prog.funcs:
                raise ProgramError(f"function {s.func} is not declared", s.loc.line, s.loc.col,
                                   source)
    return prog


def parse_program_file(path) -> Program:
    path = Path(path)
    return parse_program(path.read_text(), source=str(path))


# --------------------------------------------------------------------------
# parties


def _flatten(prog: Program, name: str, stack: tuple[str, ...], allow_spawn: bool,
             spawns: list[SpawnStmt]) -> list[ChanStmt]:
    f = prog.funcs[name]
    out: list[ChanStmt] = []
    for s in f.body:
        if isinstance(s, CallStmt):
            if s.func in stack or s.func == name:
                raise ProgramError(f"recursive call to {s.func}", s.loc.line, s.loc.col, prog.source)
            out += _flatten(prog, s.func, stack + (name,), allow_spawn, spawns)
        elif isinstance(s, SpawnStmt):
            if not allow_spawn:
                raise ProgramError(f"party {stack[0] if stack else name} spawns {s.func}; "
                                   "parties must be fixed in advance", s.loc.line, s.loc.col,
                                   prog.source)
            spawns.append(s)
        else:
            out.append(s)
    return out


def extract_parties(prog: Program) -> list[PartyTrace]:
    """Straight-line channel traces of the spawned goroutines, sorted by name."""
    if "main" not in prog.funcs:
        raise ProgramError("no func main", 1, 1, prog.source)
    spawns: list[SpawnStmt] = []
    main_ops = _flatten(prog, "main", (), True, spawns)
    if main_ops:
        s = main_ops[0]
        raise ProgramError("main must not communicate; move channel operations into a party",
                           s.loc.line, s.loc.col, prog.source)
    seen: set[str] = set()
    traces = []
    for sp in spawns:
        if sp.func in seen:
            raise ProgramError(f"{sp.func} is spawned more than once", sp.loc.line, sp.loc.col,
                               prog.source)
        seen.add(sp.func)
        steps = _flatten(prog, sp.func, (), False, [])
        if steps:
            traces.append(PartyTrace(sp.func, tuple(steps)))
    return sorted(traces, key=lambda t: t.party)


def render_program(channels: dict[str, int], parties: dict[str, list[ChanStmt]]) -> str:
    """Go source for straight-line parties; used to build canonical implementations."""
    lines = ["package main", ""]
    lines += [f"var {c} = make(chan int, {k})" for c, k in channels.items()]
    lines += ["", "func main() {"] + [f"\tgo {p}()" for p in parties] + ["}"]
    for p, steps in parties.items():
        lines += ["", f"func {p}() {{"] + [f"\t{s}" for s in steps] + ["}"]
    return "\n".join(lines) + "\n"
