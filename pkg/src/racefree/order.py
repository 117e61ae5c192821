"""Happens-before and causally-before orders over event points.

Every event is split into a *start* point and a *completion* point joined by
an internal edge.  Program order and guard edges go from the completion of
one event to the start of another; the channel rules go from a start to a
completion.  Reachability is always answered by a fresh graph search, the
transitive closure is never stored.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .errors import OrderError
from .protocol import (
    Event,
    EventRef,
    Kind,
    Node,
    events_of,
    guards,
    seq_ordered,
    transmissions,
)

START, COMPLETE = "s", "c"


class EdgeLabel(str, Enum):
    INTERNAL = "internal"
    PROGRAM = "program-order"
    CHANNEL = "channel"
    CAPACITY = "capacity-rule"
    GUARD = "guard-asserted"
    DERIVED = "derived"


@dataclass(frozen=True)
class EventPoint:
    event: EventRef
    kind: Kind
    phase: str

    def sort_key(self):
        return (self.event.index, self.event.party, self.kind.value, self.phase != START)

    def __lt__(self, other: "EventPoint") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return f"{self.event}.{self.kind.value}.{self.phase}"

    @classmethod
    def parse(cls, text: str) -> "EventPoint":
        try:
            ref, kind, phase = text.strip().rsplit(".", 2)
            if phase not in (START, COMPLETE):
                raise ValueError(phase)
            return cls(EventRef.parse(ref), Kind(kind), phase)
        except ValueError as exc:
            raise OrderError(f"bad event point {text!r}") from exc


@dataclass(frozen=True)
class Edge:
    src: EventPoint
    dst: EventPoint
    label: EdgeLabel
    channel: str | None = None

    @property
    def label_text(self) -> str:
        if self.label is EdgeLabel.CHANNEL:
            return f"channel({self.channel})"
        return self.label.value

    def sort_key(self):
        return (self.src.sort_key(), self.dst.sort_key(), self.label_text)


@dataclass(frozen=True)
class CbTriple:
    send: EventRef
    channel: str
    recv: EventRef

    def __str__(self) -> str:
        return f"{self.send} -{self.channel}-> {self.recv}"


@dataclass(frozen=True)
class CbOrder:
    triples: frozenset[CbTriple]

    def sorted(self) -> list[CbTriple]:
        return sorted(self.triples, key=lambda t: (t.send, t.recv))

    @cached_property
    def _by_send(self) -> dict[EventRef, CbTriple]:
        return {t.send: t for t in self.triples}

    def receive_of_send(self, s: EventRef) -> EventRef:
        try:
            return self._by_send[s].recv
        except KeyError:
            raise OrderError(f"send {s} has no causally-after receive") from None

    def on_channel(self, channel: str) -> "CbOrder":
        return CbOrder(frozenset(t for t in self.triples if t.channel == channel))


@dataclass(frozen=True)
class HbOrder:
    nodes: frozenset[EventPoint]
    edges: frozenset[Edge]
    unsound_derivation: bool = False

    @cached_property
    def succ(self) -> dict[EventPoint, list[EventPoint]]:
        out: dict[EventPoint, set[EventPoint]] = {n: set() for n in self.nodes}
        for e in self.edges:
            out[e.src].add(e.dst)
        return {n: sorted(v) for n, v in out.items()}

    @cached_property
    def _points(self) -> dict[tuple[EventRef, str], EventPoint]:
        return {(p.event, p.phase): p for p in self.nodes}

    def events(self) -> list[EventRef]:
        return sorted({p.event for p in self.nodes})

    def point(self, ref: EventRef, phase: str) -> EventPoint:
        try:
            return self._points[(ref, phase)]
        except KeyError:
            raise OrderError(f"unknown event {ref}") from None

    def start(self, ref: EventRef) -> EventPoint:
        return self.point(ref, START)

    def completion(self, ref: EventRef) -> EventPoint:
        return self.point(ref, COMPLETE)

    def with_edges(self, extra: Iterable[Edge], unsound: bool | None = None) -> "HbOrder":
        extra = list(extra)
        for e in extra:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise OrderError(f"edge {e.src} -> {e.dst} mentions an unknown point")
        return HbOrder(self.nodes, self.edges | frozenset(extra),
                       self.unsound_derivation if unsound is None else unsound)

    def event_hb(self, a: EventRef, b: EventRef) -> bool:
        """Event-level relation: ``a`` completes before ``b`` starts."""
        return happens_before(self, self.completion(a), self.start(b))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges, key=Edge.sort_key)


# --------------------------------------------------------------------------
# generic graph helpers


def reachable(succ: Callable[[Hashable], Iterable[Hashable]], a, b) -> bool:
    """True when ``b`` can be reached from ``a`` by a path of at least one edge."""
    stack = list(succ(a))
    seen = set(stack)
    while stack:
        n = stack.pop()
        if n == b:
            return True
        for m in succ(n):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return False


def min_cycle(nodes: Sequence, succ: Mapping) -> list | None:
    """Shortest directed cycle, ties broken by the order of ``nodes``.

    Each node is tried as a starting point with a breadth-first search whose
    neighbours are visited in the order given by ``succ``; the result is
    therefore deterministic for a deterministic ``succ``.
    """
    best: list | None = None
    for v in nodes:
        parent = {}
        queue = deque([v])
        found = None
        while queue and found is None:
            n = queue.popleft()
            for m in succ.get(n, ()):
                if m == v:
                    found = n
                    break
                if m not in parent:
                    parent[m] = n
                    queue.append(m)
        if found is None:
            continue
        path = [found]
        while path[-1] != v:
            path.append(parent[path[-1]])
        cycle = path[::-1]
        if best is None or len(cycle) < len(best):
            best = cycle
    return best


# --------------------------------------------------------------------------
# public operations


def happens_before(hb: HbOrder, a: EventPoint, b: EventPoint) -> bool:
    for p in (a, b):
        if p not in hb.nodes:
            raise OrderError(f"unknown event point {p}")
    return reachable(hb.succ.__getitem__, a, b)


def detect_cycle(hb: HbOrder) -> list[EventPoint] | None:
    return min_cycle(sorted(hb.nodes), hb.succ)


def cb_of(g: Node) -> CbOrder:
    return CbOrder(frozenset(CbTriple(t.send_event(), t.channel.name, t.recv_event())
                             for t in transmissions(g)))


def _base_order(events: list[Event]) -> tuple[set[EventPoint], set[Edge]]:
    nodes, edges = set(), set()
    for e in events:
        s = EventPoint(e.ref, e.kind, START)
        c = EventPoint(e.ref, e.kind, COMPLETE)
        nodes |= {s, c}
        edges.add(Edge(s, c, EdgeLabel.INTERNAL))
    return nodes, edges


def derive_orders(g: Node) -> tuple[HbOrder, CbOrder]:
    """Program-order, guard and internal edges of ``g`` plus its CB triples."""
    evs = events_of(g)
    kinds = {e.ref: e.kind for e in evs}
    nodes, edges = _base_order(evs)

    def pt(ref: EventRef, phase: str) -> EventPoint:
        return EventPoint(ref, kinds[ref], phase)

    by_index = {t.index: t for t in transmissions(g)}
    for i, j in seq_ordered(g):
        ti, tj = by_index[i], by_index[j]
        for p in (ti.sender, ti.receiver):
            for q in (tj.sender, tj.receiver):
                if p == q:
                    edges.add(Edge(pt(EventRef(p, i), COMPLETE), pt(EventRef(q, j), START),
                                   EdgeLabel.PROGRAM))
    for gd in guards(g):
        edges.add(Edge(pt(gd.lhs, COMPLETE), pt(gd.rhs, START), EdgeLabel.GUARD))
    return HbOrder(frozenset(nodes), frozenset(edges)), cb_of(g)


def protocol_matching(g: Node) -> dict[str, list[tuple[EventRef, EventRef]]]:
    """Intended FIFO matching: per channel, transmissions in index order."""
    out: dict[str, list[tuple[EventRef, EventRef]]] = {}
    for t in sorted(transmissions(g), key=lambda t: t.index):
        out.setdefault(t.channel.name, []).append((t.send_event(), t.recv_event()))
    return out


def apply_channel_rules(hb: HbOrder,
                        matching: Mapping[str, Sequence[tuple[EventRef, EventRef]]],
                        capacities: Mapping[str, int | None]) -> HbOrder:
    """Add the two channel rules for a FIFO matching.

    ``start(S_i) -> completion(R_i)`` labelled with the channel, and
    ``start(R_i) -> completion(S_{i+k})`` for capacity ``k``.
    """
    extra = []
    for chan in sorted(matching):
        pairs = list(matching[chan])
        if chan not in capacities:
            raise OrderError(f"no capacity known for channel {chan}")
        k = capacities[chan]
        if k is None:
            raise OrderError(f"channel {chan} has capacity `any`; the channel rules need a number")
        for n, (s, r) in enumerate(pairs):
            extra.append(Edge(hb.start(s), hb.completion(r), EdgeLabel.CHANNEL, chan))
            if n + k < len(pairs):
                extra.append(Edge(hb.start(r), hb.completion(pairs[n + k][0]), EdgeLabel.CAPACITY))
    return hb.with_edges(extra)


CB_HB = "cb-hb"
HB_CB = "hb-cb"


def apply_propagation(hb: HbOrder, cb: CbOrder, rule: str) -> HbOrder:
    """Saturate ``hb`` with one propagation rule.

    * ``cb-hb``: S cb R and R hb E give S hb E.
    * ``hb-cb``: E hb S and S cb R give E hb R.  This one is not valid for
      every execution, so the result carries ``unsound_derivation``.

    Edges are only added when the pair is not yet ordered, which makes the
    operation idempotent.
    """
    if rule not in (CB_HB, HB_CB):
        raise ValueError(f"unknown propagation rule {rule!r}")
    evs = hb.events()
    extra: list[Edge] = []
    cur = hb
    changed = True
    while changed:
        changed = False
        for t in sorted(cb.triples, key=lambda t: (t.send, t.recv)):
            for e in evs:
                if rule == HB_CB:
                    src, dst, cond = e, t.recv, e != t.recv and cur.event_hb(e, t.send)
                else:
                    src, dst, cond = t.send, e, e != t.send and cur.event_hb(t.recv, e)
                if cond and not cur.event_hb(src, dst):
                    edge = Edge(cur.completion(src), cur.start(dst), EdgeLabel.DERIVED)
                    extra.append(edge)
                    cur = cur.with_edges([edge])
                    changed = True
    unsound = hb.unsound_derivation or (rule == HB_CB and bool(extra))
    return hb.with_edges(extra, unsound=unsound)


@dataclass(frozen=True)
class IsotoneResult:
    ok: bool
    violations: tuple[tuple[EventRef, EventRef], ...] = field(default=())


def check_isotone(cb: CbOrder,
                  send_order: Iterable[tuple[EventRef, EventRef]],
                  recv_order: Iterable[tuple[EventRef, EventRef]]) -> IsotoneResult:
    """Every ordered pair of sends must have its receives ordered the same way.

    The orders are given as sets of strict pairs ``(earlier, later)``.
    """
    recv_pairs = set(recv_order)
    bad = []
    for s1, s2 in sorted(set(send_order)):
        r1, r2 = cb.receive_of_send(s1), cb.receive_of_send(s2)
        if (r1, r2) not in recv_pairs:
            bad.append((s1, s2))
    return IsotoneResult(not bad, tuple(bad))


# --------------------------------------------------------------------------
# text dump


def dump_order(hb: HbOrder) -> str:
    """One ``<point> -> <point> [label]`` line per edge, sorted."""
    lines = [f"{e.src} -> {e.dst} [{e.label_text}]" for e in hb.sorted_edges()]
    if hb.unsound_derivation:
        lines.insert(0, "# unsound-derivation")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_order_dump(text: str) -> HbOrder:
    nodes, edges, unsound = set(), set(), False
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            unsound |= line == "# unsound-derivation"
            continue
        try:
            lhs, rest = line.split(" -> ", 1)
            rhs, label = rest.rsplit(" [", 1)
            label = label.rstrip("]")
            if label.startswith("channel(") and label.endswith(")"):
                lab, chan = EdgeLabel.CHANNEL, label[len("channel("):-1]
            else:
                lab, chan = EdgeLabel(label), None
        except ValueError as exc:
            raise OrderError(f"line {n}: cannot read order edge {line!r}") from exc
        a, b = EventPoint.parse(lhs), EventPoint.parse(rhs)
        for p in (a, b):
            nodes |= {EventPoint(p.event, p.kind, START), EventPoint(p.event, p.kind, COMPLETE)}
        edges.add(Edge(a, b, lab, chan))
    return HbOrder(frozenset(nodes), frozenset(edges), unsound)
