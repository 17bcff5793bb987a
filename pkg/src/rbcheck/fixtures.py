"""Bundled fixture templates and specs, plus a random template generator."""

from __future__ import annotations

import random
from importlib import resources

from .model import BROADCAST, Edge, ProcessTemplate, parse_template

TEMPLATES = (
    "fig1", "fig2", "fig2_mutated", "two_phase", "all_green", "dead_end",
    "pruned", "all_red", "drain",
)


def fixture_path(name: str):
    return resources.files(__package__).joinpath("fixtures", name)


def read_fixture(name: str) -> str:
    return fixture_path(name).read_text()


def load_template(name: str) -> ProcessTemplate:
    return parse_template(read_fixture(f"{name}.tpl"))


def load_spec(name: str):
    from .automata import parse_spec

    return parse_spec(read_fixture(f"{name}.spec"))


def random_template(
    rng: random.Random,
    max_states: int = 5,
    k: int = 2,
    max_actions: int = 3,
    max_broadcast: int = 2,
    max_letter_edges: int = 1,
) -> ProcessTemplate:
    """A broadcast-total template, by default with one edge per rendezvous letter."""
    n = rng.randint(1, max_states)
    states = tuple(f"s{i}" for i in range(n))
    init = frozenset(rng.sample(states, rng.randint(1, min(2, n))))
    edges: list[Edge] = []
    for i in range(rng.randint(1, max_actions)):
        for j in range(1, k + 1):
            count = rng.randint(1, max_letter_edges) if max_letter_edges > 1 else 1
            for _ in range(count):
                e = Edge(rng.choice(states), f"a{i}", j, rng.choice(states))
                if e not in edges:
                    edges.append(e)
    for s in states:
        targets = rng.sample(states, rng.randint(1, min(max_broadcast, n)))
        edges.extend(Edge(s, BROADCAST, 0, d) for d in targets)
    return ProcessTemplate(k, states, init, tuple(edges))


def random_guard(rng: random.Random, clocks: list[str], cmax: dict[str, int], depth: int = 0) -> str:
    if not clocks or rng.random() < 0.2:
        return rng.choice(["true", "false"]) if rng.random() < 0.3 else "true"
    if depth < 2 and rng.random() < 0.35:
        op = rng.choice(["and", "or", "not"])
        n = 1 if op == "not" else rng.randint(1, 2)
        return f"({op} " + " ".join(random_guard(rng, clocks, cmax, depth + 1) for _ in range(n)) + ")"
    x = rng.choice(clocks)
    return f"({rng.choice(['lt', 'eq'])} {rng.randint(0, cmax[x])} {x})"


def random_timed(rng: random.Random, max_states: int = 2, max_clocks: int = 2, max_const: int = 2,
                 max_actions: int = 2):
    """A small random timed template, built as text and parsed."""
    from .timed import parse_timed

    states = [f"q{i}" for i in range(rng.randint(1, max_states))]
    clocks = [f"x{i}" for i in range(rng.randint(0, max_clocks))]
    cmax = {x: rng.randint(0, max_const) for x in clocks}
    lines = ["system timed", "k 2"]
    lines += [f"clock {x} max {c}" for x, c in cmax.items()]
    lines += [f"state {s}" + (" init" if i == 0 else "") for i, s in enumerate(states)]
    seen = set()
    for a in range(rng.randint(1, max_actions)):
        for j in (1, 2):
            for _ in range(rng.randint(1, 2)):
                src, dst = rng.choice(states), rng.choice(states)
                guard = random_guard(rng, clocks, cmax)
                reset = " ".join(sorted(rng.sample(clocks, rng.randint(0, len(clocks))))) or "-"
                key = (src, a, j, dst, guard, reset)
                if key not in seen:
                    seen.add(key)
                    lines.append(f"edge {src} a{a}.{j} {dst} guard {guard} reset {reset}")
    return parse_timed("\n".join(lines) + "\n")
