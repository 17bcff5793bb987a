"""Sample the infinite-execution automaton from both sides on every fixture.

Pumped pseudo-cycles of the unwinding system must be accepted, and lassos
emitted by the emptiness check must be realizable by some finite system.

Usage: python scripts/language_sampling.py [--samples 100] [--lassos 20] [--seed 0]
"""

from __future__ import annotations

import argparse
import json
import random
from dataclasses import asdict, dataclass

from rbcheck.automata import accepts_lasso, build_ainf, emptiness, sample_lassos
from rbcheck.classify import classify
from rbcheck.fixtures import TEMPLATES, load_template
from rbcheck.model import project_run, pump_pseudo_cycle, pumping_period
from rbcheck.oracle import SearchBudget, realize_lasso, sample_pseudo_cycles
from rbcheck.unwinding import build_unwinding, strip_edge


@dataclass
class FixtureRow:
    name: str
    empty: bool
    pumped: int = 0
    accepted: int = 0
    lassos: int = 0
    realized: int = 0
    max_realized_n: int = 0


def pumped_execution(pc):
    pumped = pump_pseudo_cycle(pc.cycle, pumping_period(pc.cycle))
    for pid in pc.cycle[0].src.pids:
        cyc = project_run(pumped, pid)
        if cyc:
            return [strip_edge(e) for e in project_run(pc.prefix, pid)], [strip_edge(e) for e in cyc]
    return None


def sample_fixture(name: str, samples: int, lassos: int, seed: int, max_n: int = 5) -> FixtureRow:
    t = load_template(name)
    u = build_unwinding(t)
    a = build_ainf(u, classify(u).colors())
    row = FixtureRow(name, emptiness(a).empty)
    rng = random.Random(seed)
    for _ in range(4 * samples):
        if row.pumped == samples:
            break
        pcs = sample_pseudo_cycles(u.template, rng.randint(1, max_n), rng, 1)
        ex = pumped_execution(pcs[0]) if pcs else None
        if ex is None:
            continue
        row.pumped += 1
        row.accepted += accepts_lasso(a, *ex)
    budget = SearchBudget(max_n=max_n)
    for lasso in sample_lassos(a, lassos, random.Random(seed + 1)):
        row.lassos += 1
        rz = realize_lasso(t, lasso.prefix_word, lasso.cycle_word, budget)
        if rz is not None:
            row.realized += 1
            row.max_realized_n = max(row.max_realized_n, rz.n)
    return row


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--lassos", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    rows = [sample_fixture(n, args.samples, args.lassos, args.seed) for n in TEMPLATES]
    if args.json:
        print(json.dumps([asdict(r) for r in rows], indent=2))
    else:
        print(f"{'fixture':<14}{'empty':>6}{'pumped':>8}{'accepted':>10}{'lassos':>8}{'realized':>10}{'max n':>7}")
        for r in rows:
            print(f"{r.name:<14}{str(r.empty):>6}{r.pumped:>8}{r.accepted:>10}{r.lassos:>8}{r.realized:>10}{r.max_realized_n:>7}")
    bad = any(r.accepted < r.pumped or r.realized < r.lassos for r in rows)
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
