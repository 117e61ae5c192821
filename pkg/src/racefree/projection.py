"""Projection of global protocols onto parties and onto single endpoints.

A guard ``[P.i < Q.j]`` between two different parties becomes a rendezvous
on a fresh unbuffered channel ``~gN`` (numbered in guard order): ``P``
proves the guard and then sends, ``Q`` receives and then gets the guard.
The two new events use inserted indexes of length two, ``(i, n)`` where
``n`` counts insertions made after transmission ``i``.

A guard whose two events belong to the same party needs no message; it is
projected onto that party as a guard on the endpoint of the later event,
which the verifier discharges by program order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import ProtocolError
from .protocol import (
    EMP,
    Channel,
    DelegatedEndpoint,
    EGuard,
    Emp,
    ERecv,
    ESend,
    EventRef,
    Guard,
    Node,
    Par,
    PGuard,
    PRecv,
    PSend,
    Seq,
    Transmission,
    TransIndex,
    events_of,
    guards,
    normalize,
    render,
    seq,
)


@dataclass(frozen=True)
class GuardPlan:
    guard: Guard
    channel: Channel
    send_index: TransIndex
    recv_index: TransIndex

    @property
    def send_event(self) -> EventRef:
        return EventRef(self.guard.lhs.party, self.send_index)

    @property
    def recv_event(self) -> EventRef:
        return EventRef(self.guard.rhs.party, self.recv_index)


@dataclass
class ProjectionContext:
    """Fresh-channel and inserted-index choices for one global protocol.

    Built once per protocol so that both sides of every guard agree.
    """

    plans: dict[Guard, GuardPlan] = field(default_factory=dict)
    event_channel: dict[EventRef, Channel] = field(default_factory=dict)

    @classmethod
    def for_protocol(cls, g: Node) -> "ProjectionContext":
        ctx = cls()
        ctx.event_channel = {e.ref: e.channel for e in events_of(g)}
        counters: Counter[int] = Counter()
        n = 0
        for gd in guards(g):
            if gd in ctx.plans or gd.lhs.party == gd.rhs.party:
                continue
            n += 1
            base = gd.lhs.index.base
            counters[base] += 1
            k = TransIndex((base, counters[base]))
            h = k
            if not k < gd.rhs.index:
                # the receive must still precede rhs; borrow a slot just before it
                alt = max(1, gd.rhs.index.base - 1)
                counters[alt] += 1
                h = TransIndex((alt, counters[alt]))
            ctx.plans[gd] = GuardPlan(gd, Channel(f"~g{n}", 0), k, h)
        return ctx

    def fresh_channels(self) -> list[Channel]:
        return [p.channel for p in self.plans.values()]

    def plan_for_channel(self, name: str) -> GuardPlan | None:
        for p in self.plans.values():
            if p.channel.name == name:
                return p
        return None


def project_party(g: Node, party: str, ctx: ProjectionContext | None = None) -> Node:
    ctx = ctx or ProjectionContext.for_protocol(g)

    def go(n: Node) -> Node:
        if isinstance(n, Emp):
            return EMP
        if isinstance(n, Seq):
            return Seq(go(n.left), go(n.right))
        if isinstance(n, Par):
            return Par(go(n.left), go(n.right))
        if isinstance(n, Transmission):
            if n.sender == party:
                return PSend(n.send_event(), n.channel)
            if n.receiver == party:
                return PRecv(n.channel, n.recv_event())
            return EMP
        if isinstance(n, Guard):
            if n.lhs.party == n.rhs.party:
                if n.lhs.party != party:
                    return EMP
                return PGuard(ctx.event_channel[n.rhs], n.lhs)
            plan = ctx.plans.get(n)
            if plan is None:
                raise ProtocolError(f"guard {render(n)} is not known to the projection context")
            if party == n.lhs.party:
                return seq(PGuard(plan.channel, n.lhs), PSend(plan.send_event, plan.channel))
            if party == n.rhs.party:
                return seq(PRecv(plan.channel, plan.recv_event), PGuard(plan.channel, n.rhs))
            return EMP
        raise TypeError(f"not a global protocol node: {n!r}")

    return normalize(go(g))


def project_endpoint(pi: Node, channel: Channel | str) -> Node:
    name = channel if isinstance(channel, str) else channel.name

    def go(n: Node) -> Node:
        if isinstance(n, Seq):
            return Seq(go(n.left), go(n.right))
        if isinstance(n, Par):
            return Par(go(n.left), go(n.right))
        if isinstance(n, PSend) and n.channel.name == name:
            return ESend(n.event)
        if isinstance(n, PRecv) and n.channel.name == name:
            return ERecv(n.event)
        if isinstance(n, PGuard) and n.channel.name == name:
            return EGuard(n.event)
        if isinstance(n, (Emp, PSend, PRecv, PGuard)):
            return EMP
        raise TypeError(f"not a per-party protocol node: {n!r}")

    return normalize(go(pi))


def endpoints_of(pi: Node) -> dict[str, Channel]:
    """Channels mentioned by a per-party protocol, in order of appearance."""
    from .protocol import leaves

    out: dict[str, Channel] = {}
    for x in leaves(pi):
        if isinstance(x, (PSend, PRecv, PGuard)):
            out.setdefault(x.channel.name, x.channel)
    return out


def project_all(g: Node, party: str, ctx: ProjectionContext | None = None) -> dict[str, Node]:
    """Per-endpoint protocols of ``party``, keyed by channel name."""
    pi = project_party(g, party, ctx)
    return {name: project_endpoint(pi, ch) for name, ch in endpoints_of(pi).items()}


@dataclass(frozen=True)
class PartyResidue:
    """What is left of a party's per-endpoint protocols, recombined with ``||``."""

    party: str
    endpoints: tuple[tuple[str, Node], ...]

    @property
    def is_empty(self) -> bool:
        return all(isinstance(normalize(z), Emp) for _, z in self.endpoints)

    def render(self) -> str:
        live = [(c, z) for c, z in self.endpoints if not isinstance(normalize(z), Emp)]
        if not live:
            return f"{self.party}: emp"
        return f"{self.party}: " + " || ".join(f"{c}:{{{render(z)}}}" for c, z in live)


def unproject(residues: dict[str, Node], party: str) -> PartyResidue:
    return PartyResidue(party, tuple(sorted((c, normalize(z)) for c, z in residues.items())))


def delegate(channel: Channel | str, protocol: Node) -> DelegatedEndpoint:
    ch = Channel(channel) if isinstance(channel, str) else channel
    return DelegatedEndpoint(ch, normalize(protocol))
