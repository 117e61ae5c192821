"""Ground-truth executions under Go channel semantics.

A subject (a global protocol or a program) is turned into a set of atomic
events with predecessor constraints.  Executions are explored with blocking
FIFO channels: a buffered channel of capacity ``k`` holds at most ``k``
messages, an unbuffered channel executes a send immediately followed by its
receive.  A *maximal* execution stops when nothing is enabled; events left
over are reported as pending (the run deadlocked on them).
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

from .errors import BoundExceeded, TraceSyntaxError
from .order import (
    CbOrder,
    EdgeLabel,
    HB_CB,
    apply_propagation,
    check_isotone,
    derive_orders,
    min_cycle,
)
from .program import Program, SendStmt, extract_parties
from .protocol import EventRef, Kind, Node, TransIndex, channels, events_of

DEFAULT_BOUND = 10


@dataclass(frozen=True)
class Atom:
    ref: EventRef
    kind: Kind
    channel: str

    def sort_key(self):
        return (self.ref.index, self.ref.party, self.kind.value)

    def __lt__(self, other: "Atom") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return f"{self.ref}.{self.kind.value}@{self.channel}"


@dataclass(frozen=True)
class SequentialExecution:
    order: tuple[Atom, ...]
    matching: tuple[tuple[Atom, Atom], ...]      # (send, recv) in receive order
    pending: tuple[Atom, ...] = ()

    @property
    def complete(self) -> bool:
        return not self.pending

    def sender_of(self, recv: Atom) -> Atom | None:
        for s, r in self.matching:
            if r == recv:
                return s
        return None

    def position(self, a: Atom) -> float:
        try:
            return self.order.index(a)
        except ValueError:
            return float("inf")

    def dump(self) -> str:
        lines = [str(a) for a in self.order]
        lines += [f"{r.ref} <- {s.ref}" for s, r in self.matching]
        lines += [f"blocked: {a}" for a in self.pending]
        return "\n".join(lines) + "\n"

    def __str__(self) -> str:
        body = ", ".join(str(a.ref) for a in self.order)
        tail = f" | blocked {', '.join(str(a.ref) for a in self.pending)}" if self.pending else ""
        return f"[{body}]{tail}"


# --------------------------------------------------------------------------
# subjects


@dataclass(frozen=True)
class System:
    atoms: tuple[Atom, ...]
    preds: Mapping[Atom, frozenset[Atom]]
    capacities: Mapping[str, int]


def protocol_capacities(g: Node, any_capacity: int = 1) -> dict[str, int]:
    return {n: (any_capacity if c.capacity is None else c.capacity)
            for n, c in channels(g).items()}


def system_of_protocol(g: Node, any_capacity: int = 1) -> System:
    """Events of ``g``; an event waits for its program-order and guard predecessors."""
    hb, _ = derive_orders(g)
    atoms = {e.ref: Atom(e.ref, e.kind, e.channel.name) for e in events_of(g)}
    preds: dict[Atom, set[Atom]] = {a: set() for a in atoms.values()}
    for e in hb.edges:
        if e.label in (EdgeLabel.PROGRAM, EdgeLabel.GUARD, EdgeLabel.DERIVED):
            preds[atoms[e.dst.event]].add(atoms[e.src.event])
    return System(tuple(sorted(atoms.values())),
                  {a: frozenset(p) for a, p in preds.items()},
                  protocol_capacities(g, any_capacity))


def program_atoms(prog: Program) -> dict[tuple[str, int], Atom]:
    """``(function, step position) -> atom``; atoms are numbered from 1 per party."""
    out = {}
    for t in extract_parties(prog):
        for pos, s in enumerate(t.steps):
            kind = Kind.SEND if isinstance(s, SendStmt) else Kind.RECV
            out[(t.party, pos)] = Atom(EventRef(t.party, TransIndex((pos + 1,))), kind, s.channel)
    return out


def system_of_program(prog: Program) -> System:
    atoms = program_atoms(prog)
    preds = {}
    for (party, pos), a in atoms.items():
        preds[a] = frozenset({atoms[(party, pos - 1)]} if pos else ())
    return System(tuple(sorted(atoms.values())), preds, prog.capacities())


Subject = Union[Node, Program, System]


def as_system(subject: Subject, any_capacity: int = 1) -> System:
    if isinstance(subject, System):
        return subject
    if isinstance(subject, Program):
        return system_of_program(subject)
    return system_of_protocol(subject, any_capacity)


# --------------------------------------------------------------------------
# exploration

State = tuple[frozenset, tuple]


def _moves(sys: System, done: frozenset, bufs: dict[str, tuple]):
    ready = [a for a in sys.atoms if a not in done and sys.preds[a] <= done]
    for a in ready:
        k = sys.capacities[a.channel]
        if a.kind is Kind.SEND:
            if k == 0:
                for r in ready:
                    if r.kind is Kind.RECV and r.channel == a.channel:
                        yield (a, r), ((a, r),)
            elif len(bufs.get(a.channel, ())) < k:
                yield (a,), ()
        elif k > 0 and bufs.get(a.channel):
            yield (a,), ((bufs[a.channel][0], a),)


def _apply(sys: System, done: frozenset, bufs: dict[str, tuple], atoms: tuple):
    bufs = dict(bufs)
    for a in atoms:
        if sys.capacities[a.channel] == 0:
            continue
        q = bufs.get(a.channel, ())
        bufs[a.channel] = q + (a,) if a.kind is Kind.SEND else q[1:]
    return done | frozenset(atoms), {c: q for c, q in bufs.items() if q}


def _key(done, bufs) -> State:
    return done, tuple(sorted(bufs.items()))


def enumerate_executions(subject: Subject, bound: int = DEFAULT_BOUND,
                         any_capacity: int = 1) -> list[SequentialExecution]:
    """Every maximal execution, complete or deadlocked, in a deterministic order."""
    sys = as_system(subject, any_capacity)
    if len(sys.atoms) > bound:
        raise BoundExceeded(f"{len(sys.atoms)} events exceed the bound of {bound}")

    @lru_cache(maxsize=None)
    def suffixes(state: State) -> tuple:
        done, bufs = state[0], dict(state[1])
        out = []
        for atoms, matched in _moves(sys, done, bufs):
            nd, nb = _apply(sys, done, bufs, atoms)
            for order, match, pending in suffixes(_key(nd, nb)):
                out.append((atoms + order, matched + match, pending))
        if not out:
            pending = tuple(a for a in sys.atoms if a not in done)
            out.append(((), (), pending))
        return tuple(out)

    return [SequentialExecution(o, m, p) for o, m, p in suffixes(_key(frozenset(), {}))]


# --------------------------------------------------------------------------
# legality


@dataclass(frozen=True)
class LegalityVerdict:
    legal: bool
    reason: str = ""
    cycle: tuple[Atom, ...] = ()


def fifo_matching(order: Sequence[Atom]) -> dict[str, tuple[list[Atom], list[Atom]]]:
    per: dict[str, tuple[list[Atom], list[Atom]]] = defaultdict(lambda: ([], []))
    for a in order:
        per[a.channel][0 if a.kind is Kind.SEND else 1].append(a)
    return dict(per)


def check_legal(e: SequentialExecution, capacities: Mapping[str, int],
                preds: Mapping[Atom, Iterable[Atom]] | None = None) -> LegalityVerdict:
    """Is the linear order of ``e`` a possible run of Go channels?

    The i-th receive on a channel takes the i-th send (FIFO).  Orders are
    checked against ``send_i -> recv_i`` and ``recv_i -> send_{i+k}``
    (``k = 1`` with an adjacency requirement for unbuffered channels); any
    cycle with the linear order makes the execution illegal.
    """
    order = list(e.order)
    pos = {a: i for i, a in enumerate(order)}
    if len(pos) != len(order):
        return LegalityVerdict(False, "an event occurs twice")
    edges: dict[Atom, set[Atom]] = defaultdict(set)
    for a, b in zip(order, order[1:]):
        edges[a].add(b)
    for chan, (sends, recvs) in sorted(fifo_matching(order).items()):
        if chan not in capacities:
            return LegalityVerdict(False, f"no capacity known for channel {chan}")
        k = capacities[chan]
        keff = max(k, 1)
        for i, r in enumerate(recvs):
            if i >= len(sends):
                return LegalityVerdict(False, f"receive {r} on {chan} has no matching send")
            edges[sends[i]].add(r)
        for j, s in enumerate(sends):
            if j >= keff:
                if j - keff >= len(recvs):
                    return LegalityVerdict(False, f"send {s} exceeds the capacity of {chan}")
                edges[recvs[j - keff]].add(s)
            if k == 0:
                nxt = pos[s] + 1
                if j >= len(recvs) or nxt >= len(order) or order[nxt] != recvs[j]:
                    return LegalityVerdict(False, f"unbuffered send {s} is not immediately received")
    if preds:
        for a in order:
            for p in preds.get(a, ()):
                if p not in pos:
                    return LegalityVerdict(False, f"{a} runs before its predecessor {p}")
                edges[p].add(a)
    succ = {a: sorted(v, key=lambda x: pos[x]) for a, v in edges.items()}
    cyc = min_cycle(order, succ)
    if cyc:
        return LegalityVerdict(False, "channel rules contradict the order", tuple(cyc))
    derived = {(sends[i], r) for sends, recvs in fifo_matching(order).values()
               for i, r in enumerate(recvs)}
    if e.matching and set(e.matching) != derived:
        return LegalityVerdict(False, "recorded matching is not the FIFO matching")
    return LegalityVerdict(True)


# --------------------------------------------------------------------------
# races


@dataclass(frozen=True)
class Violation:
    recv: EventRef
    expected: EventRef
    actual: EventRef | None

    def __str__(self) -> str:
        got = self.actual if self.actual is not None else "nothing"
        return f"{self.recv} should receive from {self.expected} but receives {got}"


@dataclass(frozen=True)
class RaceVerdict:
    race_free: bool
    witness: Violation | None = None
    violations: tuple[Violation, ...] = ()


def classify_race(e: SequentialExecution, cb: CbOrder | Node,
                  labels: Mapping[Atom, EventRef] | None = None) -> RaceVerdict:
    """Race-free iff every communicates-before triple is realised by ``e``.

    ``labels`` maps execution atoms to protocol events (identity when
    omitted).  The witness is the violation whose receive runs first;
    receives that never ran come last.
    """
    if not isinstance(cb, CbOrder):
        cb = derive_orders(cb)[1]

    def lab(a: Atom | None) -> EventRef | None:
        if a is None:
            return None
        return labels.get(a) if labels is not None else a.ref

    executed = {lab(a): a for a in e.order if a.kind is Kind.RECV and lab(a) is not None}
    bad = []
    for t in cb.sorted():
        atom = executed.get(t.recv)
        actual = lab(e.sender_of(atom)) if atom is not None else None
        if actual != t.send:
            where = e.position(atom) if atom is not None else float("inf")
            bad.append((where, t.recv, Violation(t.recv, t.send, actual)))
    bad.sort(key=lambda x: (x[0], x[1]))
    vs = tuple(v for _, _, v in bad)
    return RaceVerdict(not vs, vs[0] if vs else None, vs)


def find_racy_execution(subject: Subject, cb: CbOrder | Node,
                        labels: Mapping[Atom, EventRef] | None = None,
                        any_capacity: int = 1, max_states: int = 2_000_000
                        ) -> SequentialExecution | None:
    """Search the state space for one racy maximal execution.

    Unlike :func:`enumerate_executions` this never lists executions, so it
    handles subjects far beyond the enumeration bound.
    """
    sys = as_system(subject, any_capacity)
    if not isinstance(cb, CbOrder):
        cb = derive_orders(cb)[1]
    expect = {t.recv: t.send for t in cb.triples}
    lab = (lambda a: labels.get(a)) if labels is not None else (lambda a: a.ref)
    cb_recvs = {a for a in sys.atoms if a.kind is Kind.RECV and lab(a) in expect}
    seen: set[State] = set()
    path: list[tuple[tuple, tuple]] = []

    def dfs(done, bufs) -> SequentialExecution | None:
        key = _key(done, bufs)
        if key in seen:
            return None
        seen.add(key)
        if len(seen) > max_states:
            raise BoundExceeded(f"more than {max_states} states")
        moved = False
        for atoms, matched in _moves(sys, done, bufs):
            moved = True
            path.append((atoms, matched))
            for s, r in matched:
                if lab(r) in expect and lab(s) != expect[lab(r)]:
                    return _from_path(path, ())
            nd, nb = _apply(sys, done, bufs, atoms)
            found = dfs(nd, nb)
            if found:
                return found
            path.pop()
        if not moved:
            pending = tuple(a for a in sys.atoms if a not in done)
            if any(a in cb_recvs for a in pending):
                return _from_path(path, pending)
        return None

    return dfs(frozenset(), {})


def _from_path(path, pending) -> SequentialExecution:
    order = tuple(a for atoms, _ in path for a in atoms)
    match = tuple(m for _, ms in path for m in ms)
    return SequentialExecution(order, match, tuple(pending))


# --------------------------------------------------------------------------
# counting


def count_protocols(n: int) -> tuple[int, tuple[int, ...]]:
    """Sequential single-channel protocols of ``n`` transmissions up to party renaming.

    Returns the total and the counts split by number of parties (2, 3, ...).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    vec = {2: 1}
    for _ in range(n - 1):
        nxt: dict[int, int] = defaultdict(int)
        for m, c in vec.items():
            nxt[m] += c * m * (m - 1)
            nxt[m + 1] += c * 2 * m
            nxt[m + 2] += c
        vec = dict(nxt)
    counts = tuple(vec[m] for m in sorted(vec))
    return sum(counts), counts


def brute_force_count(n: int) -> int:
    """Same count by enumerating all sequences and canonicalising names; ``n <= 3``."""
    if not 1 <= n <= 3:
        raise ValueError("brute force is limited to 1 <= n <= 3")
    pool = range(2 * n)
    pairs = [(a, b) for a in pool for b in pool if a != b]
    seen = set()
    for combo in itertools.product(pairs, repeat=n):
        names: dict[int, int] = {}
        canon = tuple(names.setdefault(p, len(names)) for pair in combo for p in pair)
        seen.add(canon)
    return len(seen)


# --------------------------------------------------------------------------
# propagation cross-check


@dataclass
class DiscrepancyReport:
    channel_checks: dict[str, bool] = field(default_factory=dict)
    racy_execution: SequentialExecution | None = None
    witness: Violation | None = None

    @property
    def fires(self) -> bool:
        """The derived orders look isotone, yet a legal racy execution exists."""
        return bool(self.channel_checks) and all(self.channel_checks.values()) \
            and self.racy_execution is not None


def hbcb_discrepancy(g: Node, bound: int = DEFAULT_BOUND, any_capacity: int = 1
                     ) -> DiscrepancyReport:
    """Contrast the isotone check under the HB-CB rule with actual executions.

    Receive orders come from the saturated HB order.  Send orders come from
    HB, or else from every enumerated execution agreeing (an event that
    never runs counts as last).
    """
    hb, cb = derive_orders(g)
    hb2 = apply_propagation(hb, cb, HB_CB)
    execs = enumerate_executions(g, bound, any_capacity)
    caps = protocol_capacities(g, any_capacity)
    atom_of = {a.ref: a for e in execs for a in e.order + e.pending}
    report = DiscrepancyReport()
    for chan in sorted({t.channel for t in cb.triples}):
        tri = cb.on_channel(chan)
        sends = sorted(t.send for t in tri.triples)
        recvs = sorted(t.recv for t in tri.triples)

        def agreed(a, b):
            return all(e.position(atom_of[a]) < e.position(atom_of[b]) for e in execs)

        send_pairs = {(a, b) for a in sends for b in sends
                      if a != b and (hb.event_hb(a, b) or agreed(a, b))}
        recv_pairs = {(a, b) for a in recvs for b in recvs if a != b and hb2.event_hb(a, b)}
        report.channel_checks[chan] = check_isotone(tri, send_pairs, recv_pairs).ok
    for e in execs:
        verdict = classify_race(e, cb)
        if not verdict.race_free and check_legal(e, caps).legal:
            report.racy_execution, report.witness = e, verdict.witness
            break
    return report


# --------------------------------------------------------------------------
# trace text


def parse_trace(text: str, source: str | None = None) -> SequentialExecution:
    import re

    atom_re = re.compile(r"([A-Za-z_]\w*)\.(\d+(?:\.\d+)*)\.([SR])@([A-Za-z_~]\w*)$")
    match_re = re.compile(r"(\S+)\s*<-\s*(\S+)$")
    order, pending, pairs = [], [], []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        blocked = line.startswith("blocked:")
        body = line[len("blocked:"):].strip() if blocked else line
        m = atom_re.match(body)
        if m:
            a = Atom(EventRef(m.group(1), TransIndex.parse(m.group(2))), Kind(m.group(3)), m.group(4))
            (pending if blocked else order).append(a)
            continue
        m = match_re.match(line)
        if m:
            pairs.append((m.group(1), m.group(2), n))
            continue
        raise TraceSyntaxError(f"cannot read trace line {raw.strip()!r}", n, 1, source)
    by_ref = {str(a.ref): a for a in order}
    matching = []
    for r, s, n in pairs:
        if r not in by_ref or s not in by_ref:
            raise TraceSyntaxError(f"matching {r} <- {s} names an event that did not run", n, 1, source)
        matching.append((by_ref[s], by_ref[r]))
    return SequentialExecution(tuple(order), tuple(matching), tuple(pending))


def program_labels(prog: Program, result) -> dict[Atom, EventRef]:
    """Protocol events consumed by each program statement, from a verification result."""
    from .verifier import event_labels

    atoms = program_atoms(prog)
    return {atoms[k]: e for k, e in event_labels(result).items() if k in atoms}
