"""Random global protocols for property tests."""

import random

from racefree.protocol import (
    EMP,
    Channel,
    Emp,
    Guard,
    Node,
    Par,
    Seq,
    Transmission,
    events_of,
    index_transmissions,
)

PARTIES = "ABCD"
CHANNELS = "cd"


def random_protocol(rng: random.Random, max_trans: int = 4, max_parties: int = 4,
                    par_prob: float = 0.2, guard_count: int = 0) -> Node:
    """At most ``max_trans`` transmissions over at most ``max_parties`` parties.

    Channel capacities are drawn from {0, 1, 2}; ``guard_count`` random
    guards between existing events are spliced in at random positions.
    """
    n = rng.randint(1, max_trans)
    ps = PARTIES[:rng.randint(2, max_parties)]
    caps = {c: rng.choice([0, 1, 2]) for c in CHANNELS}
    leaves = []
    for _ in range(n):
        a, b = rng.sample(ps, 2)
        c = rng.choice(CHANNELS)
        leaves.append(Transmission(a, Channel(c, caps[c]), b))

    def build(xs):
        if len(xs) == 1:
            return xs[0]
        k = rng.randint(1, len(xs) - 1)
        op = Par if rng.random() < par_prob else Seq
        return op(build(xs[:k]), build(xs[k:]))

    g = index_transmissions(build(leaves))
    refs = [e.ref for e in events_of(g)]
    for _ in range(guard_count):
        lhs, rhs = rng.sample(refs, 2)
        g = _splice(rng, g, Guard(lhs, rhs))
    return g


def _splice(rng, g, leaf):
    if isinstance(g, (Seq, Par)) and rng.random() < 0.7:
        if rng.random() < 0.5:
            return type(g)(_splice(rng, g.left, leaf), g.right)
        return type(g)(g.left, _splice(rng, g.right, leaf))
    return Seq(g, leaf) if rng.random() < 0.5 else Seq(leaf, g)


def strip_guards(g: Node) -> Node:
    if isinstance(g, (Seq, Par)):
        return type(g)(strip_guards(g.left), strip_guards(g.right))
    if isinstance(g, Guard):
        return EMP
    return g


__all__ = ["random_protocol", "strip_guards", "Emp"]
