"""Guard insertion that makes a global protocol race-free."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import TransformError
from .order import EventPoint, derive_orders, detect_cycle
from .protocol import (
    Diagnostic,
    Guard,
    Node,
    Par,
    Seq,
    Transmission,
    TransIndex,
    guards,
    render,
    seq_ordered,
    transmissions,
    validate,
)


@dataclass(frozen=True)
class InsertedGuard:
    guard: Guard
    before: TransIndex

    def __str__(self) -> str:
        return f"[{self.guard.lhs} < {self.guard.rhs}] before transmission {self.before}"


@dataclass
class TransformReport:
    input: Node
    output: Node
    inserted: list[InsertedGuard] = field(default_factory=list)
    warnings: list[Diagnostic] = field(default_factory=list)

    def render(self) -> str:
        lines = [f"input:  {render(self.input)}", f"output: {render(self.output)}"]
        lines += [f"inserted {g}" for g in self.inserted]
        lines += [str(w) for w in self.warnings]
        return "\n".join(lines)


def screen_deadlock(g: Node) -> list[EventPoint] | None:
    """Minimal HB cycle among the guards of ``g``, or ``None``."""
    return detect_cycle(derive_orders(g)[0])


def covering_pairs(g: Node) -> tuple[list[tuple[Transmission, Transmission]], list[tuple[Transmission, Transmission]]]:
    """Same-channel pairs adjacent in sequencing order, and pairs with no sequencing at all."""
    before = seq_ordered(g)
    by_chan: dict[str, list[Transmission]] = {}
    for t in transmissions(g):
        by_chan.setdefault(t.channel.name, []).append(t)
    covering, unordered = [], []
    for chan in sorted(by_chan):
        ts = by_chan[chan]
        for a in ts:
            for b in ts:
                if a.index >= b.index:
                    continue
                if (a.index, b.index) in before:
                    if not any((a.index, c.index) in before and (c.index, b.index) in before
                               for c in ts):
                        covering.append((a, b))
                elif (b.index, a.index) not in before:
                    unordered.append((a, b))
    covering.sort(key=lambda p: (p[1].index, p[0].index))
    return covering, unordered


def _insert(g: Node, plan: dict[TransIndex, list[Guard]]) -> Node:
    """Put each planned guard list immediately before its transmission.

    When the transmission is the right operand of a ``;`` the guards extend
    that chain on the left, so ``T1 ; T2`` becomes ``T1 ; G ; G' ; T2`` with
    the usual left association.
    """

    def go(n: Node) -> Node:
        if isinstance(n, Seq):
            left = go(n.left)
            if isinstance(n.right, Transmission) and n.right.index in plan:
                for gd in plan[n.right.index]:
                    left = Seq(left, gd)
                return Seq(left, n.right)
            return Seq(left, go(n.right))
        if isinstance(n, Par):
            return Par(go(n.left), go(n.right))
        if isinstance(n, Transmission) and n.index in plan:
            out: Node | None = None
            for gd in plan[n.index]:
                out = gd if out is None else Seq(out, gd)
            return Seq(out, n)
        return n

    return go(g)


def make_race_free(g: Node) -> TransformReport:
    errors = [d for d in validate(g) if d.severity == "error"]
    if errors:
        raise TransformError("input protocol is not valid: " + "; ".join(map(str, errors)))
    cycle = screen_deadlock(g)
    if cycle:
        raise TransformError("input protocol has a happens-before cycle: "
                             + " -> ".join(map(str, cycle)))
    covering, unordered = covering_pairs(g)
    present = set(guards(g))
    plan: dict[TransIndex, list[Guard]] = {}
    inserted = []
    for a, b in covering:
        for gd in (Guard(a.send_event(), b.send_event()), Guard(a.recv_event(), b.recv_event())):
            if gd in present:
                continue
            present.add(gd)
            plan.setdefault(b.index, []).append(gd)
            inserted.append(InsertedGuard(gd, b.index))
    warnings = [
        Diagnostic("unordered-same-channel",
                   f"transmissions {a.index} and {b.index} share channel {a.channel} but are only "
                   "composed in parallel; no guard can order them",
                   severity="warning")
        for a, b in unordered
    ]
    return TransformReport(g, _insert(g, plan), inserted, warnings)
