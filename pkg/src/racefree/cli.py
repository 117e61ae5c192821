"""Command line interface.

Exit codes: 0 success, 1 verification failure or races found, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import oracle
from .errors import RaceFreeError
from .order import (
    CB_HB,
    HB_CB,
    apply_channel_rules,
    apply_propagation,
    derive_orders,
    detect_cycle,
    dump_order,
    parse_order_dump,
    protocol_matching,
)
from .program import parse_program_file
from .projection import ProjectionContext, project_endpoint, project_party
from .protocol import Node, parse_file, parties, render, validate
from .render import order_diagram, protocol_diagram, render_diagram, trace_diagram
from .transform import make_race_free
from .verifier import EAGER, ON_DEMAND, verify

OK, VIOLATION, INPUT_ERROR = 0, 1, 2


def _emit(out, data) -> None:
    out.write(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _bindings(pairs: list[str] | None) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep or not key or not val:
            raise RaceFreeError(f"--bind expects NAME=TARGET, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _protocol(args) -> Node:
    return parse_file(args.protocol)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args, out) -> int:
    g = _protocol(args)
    diags = validate(g)
    cycle = detect_cycle(derive_orders(g)[0])
    if args.format == "json":
        _emit(out, {"diagnostics": [str(d) for d in diags],
                    "cycle": [str(p) for p in cycle] if cycle else None})
    else:
        for d in diags:
            out.write(f"{d}\n")
        if cycle:
            out.write("happens-before cycle: " + " -> ".join(map(str, cycle)) + "\n")
        if not diags and not cycle:
            out.write("ok\n")
    return VIOLATION if diags or cycle else OK


def cmd_verify(args, out) -> int:
    g = _protocol(args)
    prog = parse_program_file(args.program)
    res = verify(prog, g, _bindings(args.bind), strategy=args.strategy, workers=args.workers)
    if args.format == "json":
        data = res.to_json()
        if args.trace:
            for pj, pr in zip(data["parties"], res.parties):
                pj["trace"] = [{"step": t.label, "assertion": t.assertion.render()} for t in pr.trace]
        _emit(out, data)
    else:
        for p in res.parties:
            line = f"{p.party}: {p.outcome}"
            if p.failure:
                line += f" at {p.failure}"
            out.write(line + "\n")
            if args.trace:
                for t in p.trace:
                    out.write(f"    {t.label}: {t.assertion.render()}\n")
        out.write(f"residue: {res.render()}\n")
        out.write("verified\n" if res.success else "NOT verified\n")
    return OK if res.success else VIOLATION


def cmd_transform(args, out) -> int:
    g = _protocol(args)
    try:
        rep = make_race_free(g)
    except RaceFreeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VIOLATION
    if args.format == "json":
        _emit(out, {"input": render(rep.input), "output": render(rep.output),
                    "inserted": [str(i) for i in rep.inserted],
                    "warnings": [str(w) for w in rep.warnings]})
    else:
        out.write(render(rep.output) + "\n")
        for w in rep.warnings:
            sys.stderr.write(f"{w}\n")
    return OK


def cmd_project(args, out) -> int:
    g = _protocol(args)
    if args.party not in parties(g):
        raise RaceFreeError(f"party {args.party} does not occur in the protocol")
    ctx = ProjectionContext.for_protocol(g)
    pi = project_party(g, args.party, ctx)
    text = render(project_endpoint(pi, args.endpoint)) if args.endpoint else render(pi)
    if args.format == "json":
        _emit(out, {"party": args.party, "endpoint": args.endpoint, "protocol": text})
    else:
        out.write(text + "\n")
    return OK


def cmd_simulate(args, out) -> int:
    g = _protocol(args)
    labels = None
    if args.program:
        prog = parse_program_file(args.program)
        res = verify(prog, g, _bindings(args.bind))
        labels = oracle.program_labels(prog, res)
        subject, caps = prog, prog.capacities()
    else:
        subject, caps = g, oracle.protocol_capacities(g, args.any_capacity)
    execs = oracle.enumerate_executions(subject, args.bound, args.any_capacity)
    rows = []
    racy = 0
    for e in execs:
        legal = oracle.check_legal(e, caps)
        verdict = oracle.classify_race(e, derive_orders(g)[1], labels)
        racy += not verdict.race_free
        rows.append((e, legal, verdict))
    if args.format == "json":
        _emit(out, {"executions": [{
            "order": [str(a) for a in e.order],
            "matching": [f"{r.ref} <- {s.ref}" for s, r in e.matching],
            "blocked": [str(a) for a in e.pending],
            "legal": lg.legal,
            "race_free": v.race_free,
            "witness": str(v.witness) if v.witness else None,
        } for e, lg, v in rows], "racy": racy, "total": len(rows)})
    else:
        for n, (e, lg, v) in enumerate(rows, start=1):
            status = "race-free" if v.race_free else f"RACE: {v.witness}"
            out.write(f"#{n} {e} legal={lg.legal} {status}\n")
        out.write(f"{len(rows)} executions, {racy} with races\n")
    return VIOLATION if racy else OK


def cmd_count(args, out) -> int:
    rows = []
    for n in range(1, args.n + 1):
        total, vec = oracle.count_protocols(n)
        row = {"n": n, "total": total, "by_parties": list(vec)}
        if args.brute_force and n <= 3:
            row["brute_force"] = oracle.brute_force_count(n)
        rows.append(row)
    if args.format == "json":
        _emit(out, {"rows": rows})
    else:
        for r in rows:
            extra = f"  brute-force {r['brute_force']}" if "brute_force" in r else ""
            out.write(f"{r['n']} → {r['total']}  {tuple(r['by_parties'])}{extra}\n")
    bad = any(r.get("brute_force", r["total"]) != r["total"] for r in rows)
    return VIOLATION if bad else OK


def cmd_render(args, out) -> int:
    if args.protocol:
        d = protocol_diagram(_protocol(args))
    elif args.trace:
        d = trace_diagram(oracle.parse_trace(Path(args.trace).read_text(), args.trace))
    else:
        d = order_diagram(parse_order_dump(Path(args.orders).read_text()))
    out.write(render_diagram(d, args.format))
    return OK


def cmd_orders(args, out) -> int:
    g = _protocol(args)
    hb, cb = derive_orders(g)
    if args.propagate:
        hb = apply_propagation(hb, cb, args.propagate)
    if args.channel_rules:
        hb = apply_channel_rules(hb, protocol_matching(g),
                                 oracle.protocol_capacities(g, args.any_capacity))
    out.write(dump_order(hb))
    return OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="racefree",
                                 description="Race checking for Go-style channel protocols.")
    sub = ap.add_subparsers(dest="command", required=True)

    def fmt(p, choices=("text", "json")):
        p.add_argument("--format", choices=choices, default=choices[0])

    p = sub.add_parser("validate", help="check protocol well-formedness")
    p.add_argument("--protocol", required=True)
    fmt(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("verify", help="verify a program against a protocol")
    p.add_argument("--protocol", required=True)
    p.add_argument("--program", required=True)
    p.add_argument("--bind", action="append", metavar="NAME=TARGET",
                   help="bind a protocol party to a function or an endpoint to a channel")
    p.add_argument("--strategy", choices=(ON_DEMAND, EAGER), default=ON_DEMAND)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trace", action="store_true", help="print intermediate assertions")
    fmt(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="insert guards to make a protocol race-free")
    p.add_argument("--protocol", required=True)
    fmt(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("project", help="project a protocol onto a party or endpoint")
    p.add_argument("--protocol", required=True)
    p.add_argument("--party", required=True)
    p.add_argument("--endpoint")
    fmt(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("simulate", help="enumerate executions and classify races")
    p.add_argument("--protocol", required=True)
    p.add_argument("--program")
    p.add_argument("--bind", action="append", metavar="NAME=TARGET")
    p.add_argument("--bound", type=int, default=oracle.DEFAULT_BOUND)
    p.add_argument("--any-capacity", type=int, default=1)
    fmt(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("count", help="count sequential protocols up to renaming")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--brute-force", action="store_true")
    fmt(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("render", help="draw a protocol, order dump or trace")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--protocol")
    src.add_argument("--trace")
    src.add_argument("--orders")
    fmt(p, ("dot", "mermaid"))
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("orders", help="dump the happens-before order of a protocol")
    p.add_argument("--protocol", required=True)
    p.add_argument("--propagate", choices=(CB_HB, HB_CB))
    p.add_argument("--channel-rules", action="store_true")
    p.add_argument("--any-capacity", type=int, default=1)
    p.set_defaults(func=cmd_orders)
    return ap


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.func(args, out)
    except (RaceFreeError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
