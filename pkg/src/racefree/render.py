"""Graphviz and Mermaid diagrams for protocols, orders and executions.

Each party is drawn as a lifeline holding its events.  Solid edges carry
happens-before facts; dotted edges labelled with a channel carry the
communicates-before expectation of a protocol.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .oracle import SequentialExecution
from .order import EdgeLabel, HbOrder, derive_orders
from .protocol import EventRef, Node, parties

SOLID, DOTTED = "solid", "dotted"


@dataclass(frozen=True)
class DiagramEdge:
    src: EventRef
    dst: EventRef
    style: str = SOLID
    label: str = ""


@dataclass
class Diagram:
    lifelines: list[str] = field(default_factory=list)
    events: list[EventRef] = field(default_factory=list)
    captions: dict[EventRef, str] = field(default_factory=dict)
    edges: list[DiagramEdge] = field(default_factory=list)

    def edge_set(self) -> set[tuple[str, str, str, str]]:
        return {(str(e.src), str(e.dst), e.style, e.label) for e in self.edges}


def _hb_event_edges(hb: HbOrder) -> list[DiagramEdge]:
    out = set()
    for e in hb.edges:
        if e.label in (EdgeLabel.PROGRAM, EdgeLabel.GUARD, EdgeLabel.DERIVED) \
                and e.src.event != e.dst.event:
            label = "" if e.label is EdgeLabel.PROGRAM else e.label.value
            out.add(DiagramEdge(e.src.event, e.dst.event, SOLID, label))
    return sorted(out, key=lambda d: (d.src, d.dst, d.label))


def _layout(events: list[EventRef], edges: list[DiagramEdge]) -> list[EventRef]:
    """Topological order of the edges, smallest index first; leftovers of a cycle go last."""
    indeg = {e: 0 for e in events}
    succ: dict[EventRef, list[EventRef]] = {e: [] for e in events}
    for x in edges:
        if x.src in indeg and x.dst in indeg:
            succ[x.src].append(x.dst)
            indeg[x.dst] += 1
    ready = [e for e in events if indeg[e] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        e = heapq.heappop(ready)
        out.append(e)
        for m in succ[e]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    return out + sorted(e for e in events if e not in out)


def protocol_diagram(g: Node) -> Diagram:
    hb, cb = derive_orders(g)
    d = Diagram(lifelines=parties(g))
    d.edges += _hb_event_edges(hb)
    d.edges += [DiagramEdge(t.send, t.recv, DOTTED, t.channel) for t in cb.sorted()]
    d.events = _layout(hb.events(), d.edges)
    for p in d.events:
        d.captions[p] = f"{p} {hb.start(p).kind.value}"
    return d


def order_diagram(hb: HbOrder) -> Diagram:
    d = Diagram()
    d.edges += _hb_event_edges(hb)
    chan = {(e.src.event, e.dst.event): e.channel for e in hb.edges if e.label is EdgeLabel.CHANNEL}
    d.edges += [DiagramEdge(s, r, SOLID, c) for (s, r), c in sorted(chan.items())]
    d.events = _layout(hb.events(), d.edges)
    d.lifelines = list(dict.fromkeys(e.party for e in d.events))
    for p in d.events:
        d.captions[p] = f"{p} {hb.start(p).kind.value}"
    return d


def trace_diagram(e: SequentialExecution) -> Diagram:
    """Consecutive events are joined in execution order (blocked events last).

    An edge between a matched send and receive is labelled with the channel.
    """
    seq = list(e.order) + list(e.pending)
    d = Diagram(lifelines=list(dict.fromkeys(a.ref.party for a in seq)))
    for a in seq:
        d.events.append(a.ref)
        d.captions[a.ref] = f"{a.ref} {a.kind.value}" + (" blocked" if a in e.pending else "")
    matched = {(s.ref, r.ref): r.channel for s, r in e.matching}
    for a, b in zip(seq, seq[1:]):
        d.edges.append(DiagramEdge(a.ref, b.ref, SOLID, matched.pop((a.ref, b.ref), "")))
    for (s, r), c in sorted(matched.items()):
        d.edges.append(DiagramEdge(s, r, SOLID, c))
    return d


def _node_id(e: EventRef) -> str:
    return f"{e.party}_{str(e.index).replace('.', '_')}"


def to_dot(d: Diagram, name: str = "protocol") -> str:
    lines = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=box];"]
    for p in d.lifelines:
        lines.append(f"  subgraph cluster_{p} {{")
        lines.append(f'    label="{p}";')
        for e in d.events:
            if e.party == p:
                lines.append(f'    {_node_id(e)} [label="{d.captions.get(e, str(e))}"];')
        lines.append("  }")
    for e in d.edges:
        attrs = []
        if e.style == DOTTED:
            attrs.append("style=dotted")
        if e.label:
            attrs.append(f'label="{e.label}"')
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_node_id(e.src)} -> {_node_id(e.dst)}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_mermaid(d: Diagram) -> str:
    lines = ["flowchart TB"]
    for p in d.lifelines:
        lines.append(f"  subgraph {p}")
        for e in d.events:
            if e.party == p:
                lines.append(f'    {_node_id(e)}["{d.captions.get(e, str(e))}"]')
        lines.append("  end")
    for e in d.edges:
        arrow = "-.->" if e.style == DOTTED else "-->"
        label = f"|{e.label}|" if e.label else ""
        lines.append(f"  {_node_id(e.src)} {arrow}{label} {_node_id(e.dst)}")
    return "\n".join(lines) + "\n"


def render_diagram(d: Diagram, fmt: str) -> str:
    if fmt == "dot":
        return to_dot(d)
    if fmt == "mermaid":
        return to_mermaid(d)
    raise ValueError(f"unknown diagram format {fmt!r}")
