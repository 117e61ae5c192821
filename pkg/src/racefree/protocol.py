"""Core protocol data types, the textual DSL and structural operations.

Three protocol levels share the structural nodes ``Emp``, ``Seq`` and ``Par``:

* global protocols, whose leaves are ``Transmission`` and ``Guard``;
* per-party protocols (``PSend``, ``PRecv``, ``PGuard``);
* per-endpoint protocols (``ESend``, ``ERecv``, ``EGuard``).

DSL summary (global protocols only)::

    chan c cap 2            # optional header, also `cap any`
    A -c-> B ; B -c:0-> C   # inline capacity
    (A -c-> B || C -d-> D) ; [A.1 < C.2] ; emp
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from typing import Iterator, Union

from .errors import ProtocolError, ProtocolSyntaxError

# --------------------------------------------------------------------------
# identifiers


@dataclass(frozen=True, order=True)
class TransIndex:
    path: tuple[int, ...]

    def __post_init__(self):
        if not self.path or any(p < 1 for p in self.path):
            raise ValueError(f"invalid transmission index {self.path!r}")

    @classmethod
    def parse(cls, text: str) -> "TransIndex":
        return cls(tuple(int(x) for x in text.split(".")))

    @property
    def base(self) -> int:
        return self.path[0]

    def __str__(self) -> str:
        return ".".join(map(str, self.path))


@dataclass(frozen=True)
class Channel:
    """A named channel; ``capacity`` is ``None`` for the unconstrained ``any``.

    Equality and hashing use the name only.
    """

    name: str
    capacity: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.name

    @property
    def fresh(self) -> bool:
        return self.name.startswith("~")


@total_ordering
@dataclass(frozen=True)
class EventRef:
    party: str
    index: TransIndex

    def __lt__(self, other: "EventRef") -> bool:
        return (self.index, self.party) < (other.index, other.party)

    def __str__(self) -> str:
        return f"{self.party}.{self.index}"

    @classmethod
    def parse(cls, text: str) -> "EventRef":
        m = re.fullmatch(r"([A-Za-z_]\w*)\.(\d+(?:\.\d+)*)", text.strip())
        if not m:
            raise ValueError(f"bad event reference {text!r}")
        return cls(m.group(1), TransIndex.parse(m.group(2)))


def ev(text: str) -> EventRef:
    """Shorthand: ``ev("A.1")``."""
    return EventRef.parse(text)


class Kind(str, Enum):
    SEND = "S"
    RECV = "R"


@dataclass(frozen=True, order=True)
class Event:
    ref: EventRef
    kind: Kind
    channel: Channel = field(compare=False)


# --------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Emp:
    pass


@dataclass(frozen=True)
class Seq:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Par:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Transmission:
    sender: str
    channel: Channel
    receiver: str
    index: TransIndex | None = None

    def send_event(self) -> EventRef:
        return EventRef(self.sender, self._idx())

    def recv_event(self) -> EventRef:
        return EventRef(self.receiver, self._idx())

    def _idx(self) -> TransIndex:
        if self.index is None:
            raise ProtocolError("transmission is not indexed")
        return self.index


@dataclass(frozen=True)
class Guard:
    lhs: EventRef
    rhs: EventRef


@dataclass(frozen=True)
class DelegatedEndpoint:
    """An endpoint passed as a message payload, with the protocol it still owes."""

    channel: Channel
    protocol: "Node"


@dataclass(frozen=True)
class PSend:
    event: EventRef
    channel: Channel


@dataclass(frozen=True)
class PRecv:
    channel: Channel
    event: EventRef


@dataclass(frozen=True)
class PGuard:
    channel: Channel
    event: EventRef


@dataclass(frozen=True)
class ESend:
    event: EventRef
    payload: DelegatedEndpoint | None = None


@dataclass(frozen=True)
class ERecv:
    event: EventRef
    payload: DelegatedEndpoint | None = None


@dataclass(frozen=True)
class EGuard:
    event: EventRef


Leaf = Union[Transmission, Guard, PSend, PRecv, PGuard, ESend, ERecv, EGuard]
Node = Union[Emp, Seq, Par, Leaf]
EMP = Emp()


def seq(*parts: Node) -> Node:
    """Left-associated sequential chain; ``seq()`` is ``emp``."""
    out: Node | None = None
    for p in parts:
        out = p if out is None else Seq(out, p)
    return EMP if out is None else out


def leaves(p: Node) -> Iterator[Leaf]:
    """Leaves in left-to-right order."""
    stack = [p]
    while stack:
        n = stack.pop()
        if isinstance(n, (Seq, Par)):
            stack.append(n.right)
            stack.append(n.left)
        elif not isinstance(n, Emp):
            yield n


def transmissions(g: Node) -> list[Transmission]:
    return [x for x in leaves(g) if isinstance(x, Transmission)]


def guards(g: Node) -> list[Guard]:
    return [x for x in leaves(g) if isinstance(x, Guard)]


def parties(g: Node) -> list[str]:
    """Parties in order of first appearance."""
    seen: dict[str, None] = {}
    for x in leaves(g):
        if isinstance(x, Transmission):
            seen.setdefault(x.sender)
            seen.setdefault(x.receiver)
        elif isinstance(x, Guard):
            seen.setdefault(x.lhs.party)
            seen.setdefault(x.rhs.party)
    return list(seen)


def channels(g: Node) -> dict[str, Channel]:
    out: dict[str, Channel] = {}
    for t in transmissions(g):
        out.setdefault(t.channel.name, t.channel)
    return out


def events_of(g: Node) -> list[Event]:
    """Both events of every transmission, sorted by index then party."""
    out = []
    for t in transmissions(g):
        out.append(Event(t.send_event(), Kind.SEND, t.channel))
        out.append(Event(t.recv_event(), Kind.RECV, t.channel))
    return sorted(out)


# --------------------------------------------------------------------------
# rendering


def _cap(cap: int | None) -> str:
    return "any" if cap is None else str(cap)


def _render_payload(d: DelegatedEndpoint) -> str:
    return f"<{d.channel}: {render(d.protocol)}>"


def render_leaf(x: Leaf) -> str:
    if isinstance(x, Transmission):
        cap = "" if x.channel.capacity is None else f":{x.channel.capacity}"
        return f"{x.sender} -{x.channel}{cap}-> {x.receiver}"
    if isinstance(x, Guard):
        return f"[{x.lhs} < {x.rhs}]"
    if isinstance(x, PSend):
        return f"{x.channel}!{x.event}"
    if isinstance(x, PRecv):
        return f"{x.channel}?{x.event}"
    if isinstance(x, PGuard):
        return f"guard({x.channel}, {x.event})"
    if isinstance(x, ESend):
        return f"{x.event}!" + (_render_payload(x.payload) if x.payload else "")
    if isinstance(x, ERecv):
        return f"?{x.event}" + (_render_payload(x.payload) if x.payload else "")
    if isinstance(x, EGuard):
        return f"guard({x.event})"
    if isinstance(x, DelegatedEndpoint):
        return _render_payload(x)
    raise TypeError(f"not a protocol node: {x!r}")


def render(p: Node) -> str:
    """Single-line text.  For global protocols ``parse(render(g)) == g``."""
    if isinstance(p, Emp):
        return "emp"
    if isinstance(p, Seq):
        left = render(p.left)
        right = render(p.right)
        if isinstance(p.left, Par):
            left = f"({left})"
        if isinstance(p.right, (Par, Seq)):
            right = f"({right})"
        return f"{left} ; {right}"
    if isinstance(p, Par):
        right = render(p.right)
        if isinstance(p.right, Par):
            right = f"({right})"
        return f"{render(p.left)} || {right}"
    return render_leaf(p)


# --------------------------------------------------------------------------
# structural congruence


def _chain(p: Node, kind: type) -> list[Node]:
    if isinstance(p, kind):
        return _chain(p.left, kind) + _chain(p.right, kind)
    return [p]


def normalize(p: Node) -> Node:
    """Smallest congruent form.

    ``emp`` units are dropped, ``;`` and ``||`` chains are re-associated to
    the left, and ``||`` operands are sorted by their rendered text.
    """
    if isinstance(p, Seq):
        parts = [normalize(x) for x in _chain(p, Seq)]
        flat = [y for x in parts for y in _chain(x, Seq) if not isinstance(y, Emp)]
        return seq(*flat)
    if isinstance(p, Par):
        parts = [normalize(x) for x in _chain(p, Par)]
        flat = [y for x in parts for y in _chain(x, Par) if not isinstance(y, Emp)]
        flat.sort(key=render)
        out: Node | None = None
        for x in flat:
            out = x if out is None else Par(out, x)
        return EMP if out is None else out
    if isinstance(p, (ESend, ERecv)) and p.payload is not None:
        d = p.payload
        return type(p)(p.event, DelegatedEndpoint(d.channel, normalize(d.protocol)))
    return p


def congruent(a: Node, b: Node) -> bool:
    return normalize(a) == normalize(b)


# --------------------------------------------------------------------------
# indexing and sequential ordering


def index_transmissions(g: Node) -> Node:
    """Number transmissions 1, 2, ... left to right and check guard references."""
    out = index_transmissions_unchecked(g)
    check_guard_refs(out)
    return out


def index_transmissions_unchecked(g: Node) -> Node:
    counter = iter(range(1, 1 << 30))

    def go(n: Node) -> Node:
        if isinstance(n, Seq):
            left = go(n.left)
            return Seq(left, go(n.right))
        if isinstance(n, Par):
            left = go(n.left)
            return Par(left, go(n.right))
        if isinstance(n, Transmission):
            return Transmission(n.sender, n.channel, n.receiver, TransIndex((next(counter),)))
        return n

    return go(g)


def check_guard_refs(g: Node) -> None:
    known = {e.ref for e in events_of(g)}
    for gd in guards(g):
        for ref in (gd.lhs, gd.rhs):
            if ref not in known:
                raise ProtocolError(f"guard [{gd.lhs} < {gd.rhs}] refers to unknown event {ref}")


def leaf_paths(g: Node) -> list[tuple[Leaf, tuple[tuple[str, int], ...]]]:
    """Each leaf with its path from the root: steps of (``"seq"``|``"par"``, side)."""
    out = []

    def go(n: Node, path):
        if isinstance(n, (Seq, Par)):
            tag = "seq" if isinstance(n, Seq) else "par"
            go(n.left, path + ((tag, 0),))
            go(n.right, path + ((tag, 1),))
        elif not isinstance(n, Emp):
            out.append((n, path))

    go(g, ())
    return out


def _seq_before(p1, p2) -> bool:
    k = 0
    while k < min(len(p1), len(p2)) and p1[k] == p2[k]:
        k += 1
    if k >= len(p1) or k >= len(p2):
        return False
    return p1[k][0] == "seq" and p1[k][1] == 0


def seq_ordered(g: Node) -> set[tuple[TransIndex, TransIndex]]:
    """Pairs (i, j) of transmission indexes where i precedes j by sequencing.

    That is, the closest common ancestor of the two leaves is a ``;`` node
    with transmission i on its left.
    """
    tp = [(t, p) for t, p in leaf_paths(g) if isinstance(t, Transmission)]
    out = set()
    for t1, p1 in tp:
        for t2, p2 in tp:
            if t1 is not t2 and _seq_before(p1, p2):
                out.add((t1.index, t2.index))
    return out


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.code}: {self.message}"


def _uses(g: Node) -> set[tuple[str, str, Kind]]:
    out = set()
    for t in transmissions(g):
        out.add((t.sender, t.channel.name, Kind.SEND))
        out.add((t.receiver, t.channel.name, Kind.RECV))
    return out


def validate(g: Node) -> list[Diagnostic]:
    """Conservative well-formedness checks; an empty list means valid."""
    diags: list[Diagnostic] = []
    caps: dict[str, int | None] = {}
    seen_idx: set[TransIndex] = set()
    for t in transmissions(g):
        if t.sender == t.receiver:
            diags.append(Diagnostic("self-transmission", f"{render_leaf(t)} sends to itself"))
        if t.index is None:
            diags.append(Diagnostic("unindexed", f"{render_leaf(t)} has no index"))
        elif t.index in seen_idx:
            diags.append(Diagnostic("duplicate-index", f"index {t.index} used twice"))
        else:
            seen_idx.add(t.index)
        prev = caps.setdefault(t.channel.name, t.channel.capacity)
        if prev != t.channel.capacity:
            diags.append(Diagnostic("capacity-conflict",
                                    f"channel {t.channel} used with capacities {_cap(prev)} and {_cap(t.channel.capacity)}"))
    if all(t.index is not None for t in transmissions(g)):
        try:
            check_guard_refs(g)
        except ProtocolError as exc:
            diags.append(Diagnostic("unresolved-guard", str(exc)))

    def walk(n: Node):
        if isinstance(n, Par):
            a, b = _uses(n.left), _uses(n.right)
            for party, chan, kind in sorted(a):
                other = Kind.RECV if kind is Kind.SEND else Kind.SEND
                if (party, chan, other) in b:
                    diags.append(Diagnostic(
                        "par-endpoint-conflict",
                        f"party {party} both sends and receives on {chan} across parallel branches "
                        f"({render(n)})"))
        if isinstance(n, (Seq, Par)):
            walk(n.left)
            walk(n.right)

    walk(g)
    return diags


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>-\s*(?P<chan>[A-Za-z_]\w*)\s*(?::\s*(?P<cap>\d+|any))?\s*->)
  | (?P<evref>[A-Za-z_]\w*\.\d+(?:\.\d+)*)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<par>\|\|)
  | (?P<punct>[;()\[\]<])
    """,
    re.VERBOSE,
)

_HEADER_RE = re.compile(r"^\s*chan\s+([A-Za-z_]\w*)\s+cap\s+(\d+|any)\s*(#.*)?$")


@dataclass
class _Tok:
    kind: str
    value: str
    line: int
    col: int
    cap: str | None = None


def _tokenize(text: str, source: str | None) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ProtocolSyntaxError(f"unexpected character {text[pos]!r}", line, col, source)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        elif kind == "arrow" or m.group("arrow"):
            toks.append(_Tok("arrow", m.group("chan"), line, col, m.group("cap")))
        elif kind == "punct":
            toks.append(_Tok(m.group(), m.group(), line, col))
        else:
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], source: str | None):
        self.toks = toks
        self.i = 0
        self.source = source
        self.inline_caps: dict[str, list[tuple[str, _Tok]]] = {}
        self.guard_toks: list[_Tok] = []

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str) -> _Tok:
        t = self.peek()
        if t.kind != kind:
            self.fail(f"expected {kind!r} but found {t.value or t.kind!r}", t)
        self.i += 1
        return t

    def fail(self, msg: str, t: _Tok):
        raise ProtocolSyntaxError(msg, t.line, t.col, self.source)

    def protocol(self) -> Node:
        left = self.sequence()
        while self.peek().kind == "par":
            self.i += 1
            left = Par(left, self.sequence())
        return left

    def sequence(self) -> Node:
        left = self.atom()
        while self.peek().kind == ";":
            self.i += 1
            left = Seq(left, self.atom())
        return left

    def atom(self) -> Node:
        t = self.peek()
        if t.kind == "(":
            self.i += 1
            inner = self.protocol()
            self.take(")")
            return inner
        if t.kind == "[":
            self.guard_toks.append(t)
            self.i += 1
            lhs = self.take("evref")
            self.take("<")
            rhs = self.take("evref")
            self.take("]")
            return Guard(EventRef.parse(lhs.value), EventRef.parse(rhs.value))
        if t.kind == "ident" and t.value == "emp":
            self.i += 1
            return EMP
        if t.kind == "ident":
            self.i += 1
            arrow = self.take("arrow")
            recv = self.take("ident")
            if recv.value == t.value:
                self.fail(f"party {t.value} cannot send to itself", t)
            if arrow.cap is not None:
                self.inline_caps.setdefault(arrow.value, []).append((arrow.cap, arrow))
            return Transmission(t.value, Channel(arrow.value), recv.value)
        self.fail(f"unexpected {t.value or 'end of input'!r}", t)
        raise AssertionError  # unreachable


def _cap_value(text: str) -> int | None:
    return None if text == "any" else int(text)


def parse(text: str, source: str | None = None) -> Node:
    """Parse DSL text into an indexed global protocol."""
    lines = text.split("\n")
    declared: dict[str, int | None] = {}
    for n, ln in enumerate(lines, start=1):
        m = _HEADER_RE.match(ln)
        if m:
            name, cap = m.group(1), _cap_value(m.group(2))
            if name in declared and declared[name] != cap:
                raise ProtocolSyntaxError(f"channel {name} declared twice with different capacities",
                                          n, 1, source)
            declared[name] = cap
            lines[n - 1] = ""
        elif re.match(r"^\s*chan\b", ln):
            raise ProtocolSyntaxError("malformed channel header, expected `chan NAME cap N|any`",
                                      n, 1, source)
    p = _Parser(_tokenize("\n".join(lines), source), source)
    if p.peek().kind == "eof":
        return EMP
    tree = p.protocol()
    t = p.peek()
    if t.kind != "eof":
        p.fail(f"unexpected {t.value!r}", t)

    for name, uses in p.inline_caps.items():
        for cap_text, tok in uses:
            cap = _cap_value(cap_text)
            if name in declared and declared[name] != cap:
                p.fail(f"channel {name} used with conflicting capacities", tok)
            declared[name] = cap

    def fix(n: Node) -> Node:
        if isinstance(n, Seq):
            return Seq(fix(n.left), fix(n.right))
        if isinstance(n, Par):
            return Par(fix(n.left), fix(n.right))
        if isinstance(n, Transmission):
            return Transmission(n.sender, Channel(n.channel.name, declared.get(n.channel.name)),
                                n.receiver)
        return n

    try:
        return index_transmissions(fix(tree))
    except ProtocolError:
        known = {e.ref for e in events_of(index_transmissions_unchecked(fix(tree)))}
        for gd, tok in zip(guards(tree), p.guard_toks):
            for ref in (gd.lhs, gd.rhs):
                if ref not in known:
                    p.fail(f"guard refers to {ref}, which is not an event of any transmission", tok)
        raise


def parse_file(path) -> Node:
    from pathlib import Path

    path = Path(path)
    return parse(path.read_text(), source=str(path))
