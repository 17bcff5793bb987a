"""Compare LP edge classification with oracle pseudo-cycle search on random templates.

Usage: python scripts/corpus_agreement.py [--count 200] [--seed 0] [--max-n 4]
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from dataclasses import asdict, dataclass, field

from rbcheck.classify import classify, realize_witness, t1_witness, t2_witness
from rbcheck.fixtures import random_template
from rbcheck.model import format_template
from rbcheck.oracle import SearchBudget, oracle_edge_kinds
from rbcheck.unwinding import build_unwinding


@dataclass
class CorpusReport:
    templates: int = 0
    edges: int = 0
    lp_positive: int = 0
    hard_failures: list = field(default_factory=list)
    unfound: list = field(default_factory=list)  # LP positive, oracle silent
    realized: int = 0
    seconds: float = 0.0

    @property
    def unfound_rate(self) -> float:
        return len(self.unfound) / self.lp_positive if self.lp_positive else 0.0


def run_corpus(count: int, seed: int, max_n: int, max_states: int = 5) -> CorpusReport:
    rng = random.Random(seed)
    rep = CorpusReport()
    budget = SearchBudget(max_n=max_n, max_states=50_000, max_millis=30_000)
    t0 = time.perf_counter()
    for _ in range(count):
        t = random_template(rng, max_states=max_states)
        u = build_unwinding(t)
        cls = classify(u)
        oracle = oracle_edge_kinds(u, budget)
        rep.templates += 1
        for e in u.edges:
            r, o = cls.edges[e.id], oracle[e.id]
            rep.edges += 1
            for kind, lp, seen in (("T1", r.t1, o.broadcast_free), ("T2", r.t2, o.with_broadcast)):
                if seen is not None and not lp:
                    rep.hard_failures.append({"template": format_template(t), "edge": e.id, "kind": kind})
                if lp:
                    rep.lp_positive += 1
                    if seen is None:
                        w = (t1_witness if kind == "T1" else t2_witness)(u, e)
                        ok = w is not None and realize_witness(w, u).ok
                        rep.realized += ok
                        rep.unfound.append({"template": format_template(t), "edge": e.id,
                                            "kind": kind, "realized": ok})
    rep.seconds = time.perf_counter() - t0
    return rep


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--json", action="store_true")
    args = p.parse_args(argv)
    rep = run_corpus(args.count, args.seed, args.max_n)
    if args.json:
        print(json.dumps(asdict(rep), indent=2))
    else:
        print(f"templates {rep.templates}, edges {rep.edges}, LP positives {rep.lp_positive}")
        print(f"hard failures {len(rep.hard_failures)}")
        print(f"LP positive but oracle silent: {len(rep.unfound)} ({rep.unfound_rate:.1%}), "
              f"{rep.realized} realized from their witness")
        print(f"{rep.seconds:.1f}s")
    return 1 if rep.hard_failures else 0


if __name__ == "__main__":
    sys.exit(main())
