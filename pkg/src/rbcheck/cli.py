"""Command-line entry point ``rbcheck``.

Exit codes: 0 holds / query succeeded, 1 violated, 2 usage, parse or internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .automata import Matcher, SpecError, UnsupportedFeature, check_liveness, check_safety, parse_spec
from .classify import classify
from .model import ParseError, ProcessTemplate, parse_edge_id, parse_template, validate_template
from .oracle import (
    SearchBudget,
    enumerate_states,
    exec_fin,
    find_loading_run,
    realize_lasso,
    search_pseudo_cycle,
)
from .timed import ReductionBudgetError, parse_timed, reduce_to_rb
from .unwinding import build_unwinding


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    inputs: list[str]
    options: dict
    version: str = __version__
    timings_ms: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def write(self, path: str) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _is_timed(text: str) -> bool:
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].split()
        if line:
            return line == ["system", "timed"]
    return False


def load_input(path: str, args) -> tuple[ProcessTemplate, Matcher]:
    """Read an RB or timed template; timed ones are reduced on the fly."""
    text = Path(path).read_text()
    if _is_timed(text):
        red = reduce_to_rb(parse_timed(text), cap=args.cap)
        return red.template, Matcher(red.letter_aliases(), red.state_aliases())
    t = parse_template(text)
    problems = validate_template(t)
    if problems:
        raise UsageError(f"{path}: " + "; ".join(problems))
    return t, Matcher()


def _budget(args) -> SearchBudget:
    ms = os.environ.get("RBCHECK_BUDGET_MS")
    return SearchBudget(
        max_n=args.max_n,
        max_depth=args.max_depth,
        max_states=args.max_states,
        max_millis=int(ms) if ms else args.max_ms,
    )


# -- commands -----------------------------------------------------------------------------

def cmd_reduce(args) -> int:
    red = reduce_to_rb(parse_timed(Path(args.file).read_text()), cap=args.cap, cmax_override=args.cmax)
    from .model import format_template

    text = format_template(red.template)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.map:
        Path(args.map).write_text(red.relabel_json())
    args._verdict = {"states": len(red.template.states), "actions": len(red.relabel)}
    return 0


def cmd_unwind(args) -> int:
    t, _ = load_input(args.file, args)
    u = build_unwinding(t)
    if args.dot:
        Path(args.dot).write_text(u.to_dot())
    data = u.to_json()
    if args.json:
        sys.stdout.write(_dump(data))
    else:
        print(f"n={u.n} r={u.period} m={u.m}")
        for c in data["components"]:
            print(f"P{c['index']}: states {' '.join(c['states']) or '-'}; {len(c['edges'])} rendezvous edges")
        print(f"{len(data['broadcast_edges'])} broadcast edges")
    return 0


def cmd_classify(args) -> int:
    t, _ = load_input(args.file, args)
    u = build_unwinding(t)
    edges = args.edge or None
    if edges:
        known = {e.id for e in u.edges}
        for x in edges:
            if x not in known:
                raise UsageError(f"unknown edge id {x}")
    cls = classify(u, witnesses=not args.no_witness, edges=edges, jobs=args.jobs)
    if args.dot:
        Path(args.dot).write_text(cls.to_dot())
    report = {"n": u.n, "r": u.period, "edges": cls.to_json()}
    if args.json:
        sys.stdout.write(_dump(report))
    else:
        print(f"n={u.n} r={u.period}")
        for eid, rep in cls.edges.items():
            print(f"{eid}\t{rep.color.value}\tT1={rep.t1}\tT2={rep.t2}")
    args._verdict = cls.colors()
    return 0


def _verdict_out(args, v) -> int:
    data = v.to_json(timings=args.timings)
    if args.json:
        sys.stdout.write(_dump(data))
    else:
        print(v.status)
        cex = data["counterexample"]
        if cex:
            print("prefix:", " ".join(cex["prefix"]) or "-")
            if cex["cycle"]:
                print("cycle: ", " ".join(cex["cycle"]))
            if v.realized_at_n:
                print(f"realized by the oracle at n={v.realized_at_n}")
            else:
                print("not realized by the oracle within budget")
    args._verdict = {"status": v.status}
    return 0 if v.holds else 1


def cmd_liveness(args) -> int:
    t, matcher = load_input(args.file, args)
    spec = parse_spec(Path(args.spec).read_text())
    v = check_liveness(t, spec, matcher, budget=_budget(args), realize=not args.no_realize, jobs=args.jobs)
    return _verdict_out(args, v)


def cmd_safety(args) -> int:
    t, matcher = load_input(args.file, args)
    spec = parse_spec(Path(args.spec).read_text())
    v = check_safety(t, spec, matcher, budget=_budget(args), realize=not args.no_realize)
    return _verdict_out(args, v)


def _steps(run) -> list[str]:
    return [str(s) for s in run]


def _word(text: str):
    if text in ("-", ""):
        return []
    return [parse_edge_id(x.strip()) for x in text.split(",")]


def cmd_oracle(args) -> int:
    t, _ = load_input(args.file, args)
    budget = _budget(args)
    q = args.query
    if q == "enumerate":
        g = enumerate_states(t, args.n, budget)
        out = {"n": args.n, "configurations": len(g.vertices), "transitions": len(g.edges),
               "truncated": g.truncated, "vertices": [str(v) for v in g.vertices]}
        if args.dot:
            Path(args.dot).write_text(g.to_dot())
    elif q == "exec-fin":
        ws = exec_fin(t, args.n, args.max_len, budget)
        words = sorted([e.id for e in w] for w in ws.words)
        out = {"n": args.n, "max_len": args.max_len, "truncated": ws.truncated, "words": words}
    elif q == "pseudo-cycle":
        u = build_unwinding(t)
        u.edge(args.edge)
        pc = search_pseudo_cycle(u, args.edge, budget, args.kind.replace("-", "_"))
        out = {"edge": args.edge, "found": pc is not None}
        if pc is not None:
            out.update(n=pc.n, broadcasts=pc.broadcasts, prefix=_steps(pc.prefix), cycle=_steps(pc.cycle))
    elif q == "loading":
        u = build_unwinding(t)
        lr = find_loading_run(u, args.b, args.n_target, budget)
        out = {"b": args.b, "n_target": args.n_target, "found": lr is not None}
        if lr is not None:
            out.update(n=lr.n, run=_steps(lr.run))
    else:
        prefix, cycle = _word(args.prefix), _word(args.cycle)
        if not cycle:
            raise UsageError("--cycle must be nonempty")
        rz = realize_lasso(t, prefix, cycle, budget)
        out = {"prefix": [e.id for e in prefix], "cycle": [e.id for e in cycle],
               "realized_at_n": rz.n if rz else None}
        if rz is not None:
            out.update(prefix_run=_steps(rz.prefix), cycle_run=_steps(rz.cycle))
    sys.stdout.write(_dump(out))
    args._verdict = {k: v for k, v in out.items() if k in ("found", "realized_at_n", "configurations")}
    return 0


# -- parser ------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--timings", action="store_true", help="include wall-clock times in JSON")
    common.add_argument("--manifest", metavar="PATH", help="write a run manifest")
    common.add_argument("--cap", type=int, default=100_000, help="state cap for timed reduction")
    common.add_argument("--jobs", type=int, default=1)
    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--max-n", type=int, default=4)
    budget.add_argument("--max-depth", type=int, default=64)
    budget.add_argument("--max-states", type=int, default=200_000)
    budget.add_argument("--max-ms", type=int, default=10_000)

    p = argparse.ArgumentParser(prog="rbcheck", description="parameterized checking of RB-systems")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", parents=[common], help="timed template -> RB template")
    r.add_argument("file")
    r.add_argument("-o", "--output")
    r.add_argument("--map", help="write the relabel map (JSON)")
    r.add_argument("--cmax", type=int, help="global clock constant override")
    r.set_defaults(func=cmd_reduce)

    u = sub.add_parser("unwind", parents=[common], help="reachability-unwinding")
    u.add_argument("file")
    u.add_argument("--dot")
    u.set_defaults(func=cmd_unwind)

    c = sub.add_parser("classify", parents=[common], help="edge colours")
    c.add_argument("file")
    c.add_argument("--edge", action="append", help="restrict to this edge id (repeatable)")
    c.add_argument("--dot")
    c.add_argument("--no-witness", action="store_true", help="skip per-edge LP witnesses")
    c.set_defaults(func=cmd_classify)

    for name, fn in (("safety", cmd_safety), ("liveness", cmd_liveness)):
        s = sub.add_parser(name, parents=[common, budget], help=f"{name} check against a bad-behaviour spec")
        s.add_argument("file")
        s.add_argument("--spec", required=True)
        s.add_argument("--no-realize", action="store_true", help="skip oracle replay of counterexamples")
        s.set_defaults(func=fn)

    o = sub.add_parser("oracle", help="explicit-state queries")
    osub = o.add_subparsers(dest="query", required=True)
    e = osub.add_parser("enumerate", parents=[common, budget])
    e.add_argument("file")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--dot")
    x = osub.add_parser("exec-fin", parents=[common, budget])
    x.add_argument("file")
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--max-len", type=int, required=True)
    pc = osub.add_parser("pseudo-cycle", parents=[common, budget])
    pc.add_argument("file")
    pc.add_argument("--edge", required=True)
    pc.add_argument("--kind", choices=["any", "broadcast-free", "with-broadcast"], default="any")
    ld = osub.add_parser("loading", parents=[common, budget])
    ld.add_argument("file")
    ld.add_argument("--b", type=int, required=True)
    ld.add_argument("--n-target", type=int, required=True)
    rz = osub.add_parser("realize", parents=[common, budget])
    rz.add_argument("file")
    rz.add_argument("--prefix", default="-")
    rz.add_argument("--cycle", required=True)
    for q in (e, x, pc, ld, rz):
        q.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except ParseError as exc:
        print(f"rbcheck: parse error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, SpecError, UnsupportedFeature, ReductionBudgetError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"rbcheck: error: {msg}", file=sys.stderr)
        return 2
    if args.manifest:
        opts = {k: v for k, v in vars(args).items() if k not in ("func", "_verdict", "manifest")}
        inputs = [v for k, v in opts.items() if k in ("file", "spec") and v]
        RunManifest(args.command, inputs, opts,
                    timings_ms={"total": round((time.perf_counter() - t0) * 1000, 3)},
                    verdicts=getattr(args, "_verdict", {}) | {"exit_code": code}).write(args.manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
