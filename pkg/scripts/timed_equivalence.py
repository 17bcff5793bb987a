"""Bounded check that the discrete-timed reduction preserves finite executions.

Compares the concrete timed semantics with the reduced RB-template on the
clocked fixture and on random timed templates.

Usage: python scripts/timed_equivalence.py [--count 50] [--depth 4] [--max-n 2]
"""

from __future__ import annotations

import argparse
import random
import time

from rbcheck.fixtures import random_timed, read_fixture
from rbcheck.oracle import exec_fin
from rbcheck.timed import concrete_exec_fin, parse_timed, reduce_to_rb, reduced_words


def compare(t, max_n: int, depth: int) -> list[tuple[int, int]]:
    """(n, depth) pairs where the two word sets differ."""
    red = reduce_to_rb(t)
    bad = []
    for n in range(1, max_n + 1):
        for d in range(depth + 1):
            if concrete_exec_fin(t, n, d) != reduced_words(red, exec_fin(red.template, n, d).words):
                bad.append((n, d))
    return bad


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--max-n", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    clocked = parse_timed(read_fixture("clocked.ttpl"))
    failures = [("clocked", b) for b in compare(clocked, args.max_n, 6)]
    rng = random.Random(args.seed)
    states = 0
    for i in range(args.count):
        t = random_timed(rng)
        states += len(reduce_to_rb(t).template.states)
        failures += [(f"random#{i}", b) for b in compare(t, args.max_n, args.depth)]
    print(f"clocked fixture + {args.count} random templates, n <= {args.max_n}: "
          f"{len(failures)} mismatches, mean reduced size {states / max(args.count, 1):.1f}, "
          f"{time.perf_counter() - t0:.1f}s")
    for name, (n, d) in failures[:10]:
        print(f"  mismatch {name} n={n} depth={d}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
