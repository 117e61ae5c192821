"""Per-endpoint Hoare-style verification of programs against global protocols.

Each party is checked on its own.  Its state is an :class:`Assertion`: the
remaining per-endpoint protocol of every endpoint it owns, plus the set of
events the party knows have happened.  A channel statement consumes the head
of the matching endpoint; a guard at the head of an endpoint is discharged
once its event is known.

Guard discharge is monotone (known events only grow), so when it runs does
not change any verdict or residue.  The default ``on-demand`` schedule
discharges guards on the endpoint about to be used before every statement,
on every endpoint before every send, and once more at the end.  ``eager``
discharges everything after every statement.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from .errors import BindingError
from .program import ChanStmt, Loc, PartyTrace, Program, RecvStmt, SendStmt, extract_parties
from .projection import (
    PartyResidue,
    ProjectionContext,
    project_all,
    unproject,
)
from .protocol import (
    EMP,
    Channel,
    DelegatedEndpoint,
    EGuard,
    Emp,
    ERecv,
    ESend,
    EventRef,
    Node,
    Par,
    Seq,
    channels,
    normalize,
    parties,
    render,
    seq,
)

ON_DEMAND = "on-demand"
EAGER = "eager"


# --------------------------------------------------------------------------
# assertions


@dataclass(frozen=True)
class Assertion:
    endpoints: tuple[tuple[str, Node], ...]
    known: frozenset[EventRef] = frozenset()

    @classmethod
    def of(cls, endpoints: Mapping[str, Node], known=()) -> "Assertion":
        return cls(tuple(sorted((c, normalize(z)) for c, z in endpoints.items())),
                   frozenset(known))

    def as_dict(self) -> dict[str, Node]:
        return dict(self.endpoints)

    def get(self, channel: str) -> Node | None:
        return self.as_dict().get(channel)

    def with_endpoint(self, channel: str, z: Node, add: EventRef | None = None) -> "Assertion":
        d = self.as_dict()
        d[channel] = z
        known = self.known | {add} if add is not None else self.known
        return Assertion.of(d, known)

    def without_endpoint(self, channel: str) -> "Assertion":
        d = self.as_dict()
        del d[channel]
        return Assertion.of(d, self.known)

    @property
    def is_empty(self) -> bool:
        return all(isinstance(z, Emp) for _, z in self.endpoints)

    def render(self) -> str:
        eps = " * ".join(f"{c}:{{{render(z)}}}" for c, z in self.endpoints) or "emp"
        known = ", ".join(map(str, sorted(self.known)))
        return f"{eps} & {{{known}}}"

    def __str__(self) -> str:
        return self.render()


def heads(z: Node) -> list[tuple[Node, Node]]:
    """Possible (head leaf, remainder) pairs of a per-endpoint protocol."""
    z = normalize(z)
    if isinstance(z, Emp):
        return []
    if isinstance(z, Seq):
        return [(h, normalize(seq(rest, z.right))) for h, rest in heads(z.left)]
    if isinstance(z, Par):
        return ([(h, normalize(Par(rest, z.right))) for h, rest in heads(z.left)]
                + [(h, normalize(Par(z.left, rest))) for h, rest in heads(z.right)])
    return [(z, EMP)]


def prove_guards(a: Assertion, only: str | None = None) -> Assertion:
    """Discharge every guard at the head of an endpoint whose event is known."""
    d = a.as_dict()
    changed = True
    while changed:
        changed = False
        for c in sorted(d):
            if only is not None and c != only:
                continue
            for h, rest in heads(d[c]):
                if isinstance(h, EGuard) and h.event in a.known:
                    d[c] = rest
                    changed = True
                    break
    return Assertion.of(d, a.known)


@dataclass(frozen=True)
class StepResult:
    assertion: Assertion
    event: EventRef | None = None
    error: str | None = None


def step(a: Assertion, stmt: ChanStmt, channel: str | None,
         held: Mapping[str, str] | None = None) -> StepResult:
    """Apply one channel statement.

    ``channel`` is the protocol endpoint the statement's program channel is
    bound to (``None`` when unbound).  ``held`` maps program channel names
    sent as values to the protocol endpoint they stand for.
    """
    if channel is None:
        return StepResult(a, error=f"channel {stmt.channel} is not bound to any protocol endpoint")
    z = a.get(channel)
    if z is None:
        return StepResult(a, error=f"party holds no endpoint {channel}")
    hs = heads(z)
    if not hs:
        return StepResult(a, error=f"endpoint {channel} has nothing left to do")
    want = ESend if isinstance(stmt, SendStmt) else ERecv
    for h, rest in hs:
        if not isinstance(h, want):
            continue
        if h.payload is None:
            return StepResult(a.with_endpoint(channel, rest, h.event), h.event)
        return _endpoint_transfer(a, stmt, channel, h, rest, held or {})
    blocking = ", ".join(render(h) for h, _ in hs)
    verb = "send" if want is ESend else "receive"
    return StepResult(a, error=f"cannot {verb} on {channel}: endpoint expects {blocking}")


def _endpoint_transfer(a: Assertion, stmt: ChanStmt, channel: str, h: Node, rest: Node,
                       held: Mapping[str, str]) -> StepResult:
    d: DelegatedEndpoint = h.payload
    name = d.channel.name
    if isinstance(stmt, SendStmt):
        sent = held.get(stmt.value, stmt.value)
        if sent != name:
            return StepResult(a, error=f"{channel} must carry endpoint {name}, not {stmt.value}")
        have = a.get(name)
        if have is None or normalize(have) != normalize(d.protocol):
            return StepResult(a, error=f"endpoint {name} with protocol {render(d.protocol)} is not held")
        out = a.with_endpoint(channel, rest, h.event).without_endpoint(name)
        return StepResult(out, h.event)
    if name in a.as_dict():
        return StepResult(a, error=f"endpoint {name} received twice")
    out = a.with_endpoint(channel, rest, h.event).with_endpoint(name, d.protocol)
    return StepResult(out, h.event)


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class TraceEntry:
    label: str
    assertion: Assertion


@dataclass(frozen=True)
class Failure:
    loc: Loc
    statement: str
    reason: str

    def __str__(self) -> str:
        return f"{self.loc}: `{self.statement}`: {self.reason}"


SUCCESS = "success"
FAIL_PRECONDITION = "fail_precondition"
FAIL_UNCONSUMED = "fail_unconsumed"


@dataclass
class PartyReport:
    party: str
    outcome: str
    residue: PartyResidue
    known: frozenset[EventRef]
    trace: list[TraceEntry] = field(default_factory=list)
    labels: list[tuple[ChanStmt, EventRef | None]] = field(default_factory=list)
    failure: Failure | None = None

    def assertions(self) -> list[Assertion]:
        """Distinct successive assertions, in the order they were reached."""
        out: list[Assertion] = []
        for e in self.trace:
            if not out or out[-1] != e.assertion:
                out.append(e.assertion)
        return out

    def to_json(self) -> dict:
        return {
            "party": self.party,
            "outcome": self.outcome,
            "failure": None if self.failure is None else {
                "location": str(self.failure.loc), "statement": self.failure.statement,
                "reason": self.failure.reason},
            "residue": self.residue.render(),
            "known": [str(e) for e in sorted(self.known)],
        }


@dataclass
class GlobalResidue:
    parties: list[PartyReport]
    bindings: dict[str, str] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return all(p.outcome == SUCCESS for p in self.parties)

    def party(self, name: str) -> PartyReport:
        for p in self.parties:
            if p.party == name:
                return p
        raise KeyError(name)

    def render(self) -> str:
        live = [p.residue.render() for p in self.parties if not p.residue.is_empty]
        return " || ".join(live) if live else "emp"

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "residue": self.render(),
            "bindings": dict(sorted(self.bindings.items())),
            "parties": [p.to_json() for p in self.parties],
        }


# --------------------------------------------------------------------------
# bindings


@dataclass
class Binding:
    party: dict[str, str]             # protocol party -> program function
    channel: dict[str, str]           # protocol endpoint -> program channel

    def reverse_channel(self) -> dict[str, str]:
        return {v: k for k, v in self.channel.items()}


def _usage(traces: list[PartyTrace], rev_party: Mapping[str, str]):
    senders: dict[str, set[str]] = {}
    receivers: dict[str, set[str]] = {}
    for t in traces:
        who = rev_party.get(t.party, t.party)
        for s in t.steps:
            bucket = senders if isinstance(s, SendStmt) else receivers
            bucket.setdefault(s.channel, set()).add(who)
    return senders, receivers


def resolve_bindings(prog: Program, g: Node, ctx: ProjectionContext,
                     explicit: Mapping[str, str] | None = None,
                     traces: list[PartyTrace] | None = None) -> Binding:
    """Match protocol parties and endpoints to program functions and channels.

    Protocol channels bind to program channels of the same name unless
    overridden; ``any`` accepts every capacity, a number must match exactly.
    Fresh guard channels bind to unused unbuffered program channels by a
    maximum-weight assignment that rewards a channel for being sent on by the
    guard's first party and received on by its second.
    """
    explicit = dict(explicit or {})
    traces = traces if traces is not None else extract_parties(prog)
    proto_parties = parties(g)
    proto_chans = channels(g)
    fresh = {c.name: c for c in ctx.fresh_channels()}

    party_map = {p: p for p in proto_parties}
    chan_map: dict[str, str] = {}
    for k, v in explicit.items():
        if k in party_map:
            party_map[k] = v
        elif k in proto_chans or k in fresh:
            chan_map[k] = v
        else:
            raise BindingError(f"binding {k}={v} names neither a protocol party nor an endpoint")
    funcs = {t.party for t in traces}
    for p, f in party_map.items():
        if f not in funcs:
            raise BindingError(f"protocol party {p} has no goroutine {f} in the program")
    _require_injective(party_map, "function")

    caps = prog.capacities()
    for name, ch in proto_chans.items():
        target = chan_map.setdefault(name, name)
        if target not in caps:
            raise BindingError(f"protocol channel {name} has no program channel {target}")
        if ch.capacity is not None and ch.capacity != caps[target]:
            raise BindingError(f"channel {name} has capacity {ch.capacity} in the protocol but "
                               f"{target} is declared with capacity {caps[target]}")
    for name, target in chan_map.items():
        if name in fresh:
            if target not in caps:
                raise BindingError(f"guard endpoint {name} bound to undeclared channel {target}")
            if caps[target] != 0:
                raise BindingError(f"guard endpoint {name} needs an unbuffered channel, "
                                   f"{target} has capacity {caps[target]}")

    _require_injective(chan_map, "program channel")
    todo = [n for n in fresh if n not in chan_map]
    taken = set(chan_map.values())
    candidates = [c for c in caps if caps[c] == 0 and c not in taken]
    if todo and candidates:
        rev_party = {f: p for p, f in party_map.items()}
        senders, receivers = _usage(traces, rev_party)
        _assign_fresh(todo, candidates, ctx, senders, receivers, chan_map)
    return Binding(party_map, chan_map)


def _require_injective(mapping: Mapping[str, str], what: str) -> None:
    owner: dict[str, str] = {}
    for k, v in sorted(mapping.items()):
        if v in owner:
            raise BindingError(f"{owner[v]} and {k} are both bound to {what} {v}")
        owner[v] = k


def _assign_fresh(todo, candidates, ctx, senders, receivers, chan_map):
    import numpy as np
    from scipy.optimize import linear_sum_assignment

    scores = np.zeros((len(todo), len(candidates)))
    weights = np.zeros_like(scores)
    for i, name in enumerate(todo):
        plan = ctx.plan_for_channel(name)
        for j, c in enumerate(candidates):
            s = (plan.guard.lhs.party in senders.get(c, ())) + \
                (plan.guard.rhs.party in receivers.get(c, ()))
            scores[i, j] = s
            # ties prefer pairing guard order with declaration order
            weights[i, j] = s * 1000 - abs(i - j)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    for i, j in zip(rows, cols):
        if scores[i, j] > 0:
            chan_map[todo[i]] = candidates[j]


# --------------------------------------------------------------------------
# driver


def verify_party(party: str, endpoints: Mapping[str, Node], trace: PartyTrace | None,
                 rev_chan: Mapping[str, str], strategy: str = ON_DEMAND) -> PartyReport:
    a = Assertion.of(endpoints)
    log = [TraceEntry("entry", a)]
    labels: list[tuple[ChanStmt, EventRef | None]] = []

    def prove(label: str, only: str | None = None):
        nonlocal a
        b = prove_guards(a, only)
        if b != a:
            a = b
            log.append(TraceEntry(label, a))

    if strategy == EAGER:
        prove("prove")
    failure = None
    steps = trace.steps if trace else ()
    for n, stmt in enumerate(steps):
        chan = rev_chan.get(stmt.channel)
        if strategy == ON_DEMAND:
            prove("prove", None if isinstance(stmt, SendStmt) else chan)
        res = step(a, stmt, chan, rev_chan)
        if res.error:
            failure = Failure(stmt.loc, str(stmt), res.error)
            labels += [(s, None) for s in steps[n:]]
            log.append(TraceEntry(f"fail {stmt}", a))
            break
        a = res.assertion
        labels.append((stmt, res.event))
        log.append(TraceEntry(f"after {stmt}", a))
        if strategy == EAGER:
            prove("prove")
    prove("final")
    if failure:
        outcome = FAIL_PRECONDITION
    elif a.is_empty:
        outcome = SUCCESS
    else:
        outcome = FAIL_UNCONSUMED
    return PartyReport(party, outcome, unproject(a.as_dict(), party), a.known, log, labels,
                       failure)


def verify(prog: Program, g: Node, bindings: Mapping[str, str] | None = None,
           strategy: str = ON_DEMAND, workers: int = 1) -> GlobalResidue:
    """Verify every party of ``prog`` against the global protocol ``g``.

    Parties are independent, so they can be checked concurrently with
    ``workers > 1``; the result does not depend on the number of workers.
    """
    if strategy not in (ON_DEMAND, EAGER):
        raise ValueError(f"unknown strategy {strategy!r}")
    ctx = ProjectionContext.for_protocol(g)
    traces = extract_parties(prog)
    bind = resolve_bindings(prog, g, ctx, bindings, traces)
    rev_chan = bind.reverse_channel()
    by_func = {t.party: t for t in traces}

    jobs = []
    for p in parties(g):
        eps = project_all(g, p, ctx)
        jobs.append((p, eps, by_func.get(bind.party[p])))
    bound_funcs = set(bind.party.values())
    for t in traces:
        if t.party not in bound_funcs:
            jobs.append((t.party, {}, t))

    def run(job):
        p, eps, tr = job
        return verify_party(p, eps, tr, rev_chan, strategy)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, jobs))
    else:
        reports = [run(j) for j in jobs]
    reports.sort(key=lambda r: r.party)
    flat = {**bind.channel, **{f"party {k}": v for k, v in bind.party.items() if k != v}}
    return GlobalResidue(reports, flat)


def event_labels(result: GlobalResidue) -> dict[tuple[str, int], EventRef]:
    """``(function, step position) -> protocol event`` for every consumed statement."""
    out = {}
    func_of = {k[len("party "):]: v for k, v in result.bindings.items() if k.startswith("party ")}
    for rep in result.parties:
        func = func_of.get(rep.party, rep.party)
        for pos, (_, e) in enumerate(rep.labels):
            if e is not None:
                out[(func, pos)] = e
    return out


# --------------------------------------------------------------------------
# canonical implementations


def canonical_program(g: Node, any_capacity: int = 1) -> tuple[str, dict[str, str]]:
    """Go source that follows each party's projection statement by statement.

    Every party runs its events in the left-to-right order of ``g``, so
    parallel branches are serialised the same way by all parties.  Guard
    endpoints become unbuffered channels named ``syncN``.  Returns the
    source and the endpoint bindings to pass to :func:`verify`.
    """
    from .protocol import PRecv, PSend, leaves
    from .projection import project_party

    ctx = ProjectionContext.for_protocol(g)
    proto = channels(g)
    caps = {n: (any_capacity if c.capacity is None else c.capacity) for n, c in proto.items()}
    bind: dict[str, str] = {}
    for ch in ctx.fresh_channels():
        n, name = 1, f"sync{ch.name[2:]}"
        while name in caps:
            n += 1
            name = f"sync{ch.name[2:]}_{n}"
        caps[name] = 0
        bind[ch.name] = name
    prog_name = {**{c: c for c in proto}, **bind}
    body: dict[str, list[str]] = {}
    for p in parties(g):
        steps = []
        for x in (y for leaf in leaves(g) for y in leaves(project_party(leaf, p, ctx))):
            if isinstance(x, PSend):
                steps.append(f"{prog_name[x.channel.name]} <- 0")
            elif isinstance(x, PRecv):
                steps.append(f"<-{prog_name[x.channel.name]}")
        if steps:
            body[p] = steps
    from .program import render_program

    return render_program(caps, body), bind
