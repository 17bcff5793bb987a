"""Spec automata, the B-automaton for infinite executions, products and emptiness.

The infinite-execution automaton has three copies of the unwinding.  Copy 1
reads everything, copy 2 reads green and orange edges and counts orange
rendezvous steps between broadcasts, copy 3 reads blue and green edges.  A run
is accepting when it visits copies 2/3 infinitely often with a bounded counter.

Emptiness for a single counter with increments and resets: the language is
nonempty iff a reachable SCC touches every Buchi set and either contains a
reset edge, or the increment-free part of the SCC has a strongly connected
piece touching every Buchi set.
"""

from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import networkx as nx

from .model import BROADCAST, NAME_RE, Edge, ParseError, ProcessTemplate, parse_letter
from .unwinding import NFW, Unwinding, build_afin, build_unwinding

NOOP, INC, RESET = "noop", "inc", "reset"
SUPPORTED_OPS = {NOOP, INC, RESET}


class UnsupportedFeature(ValueError):
    """An automaton feature outside the single-counter increment/reset fragment."""


class SpecError(ValueError):
    """A specification does not fit the template it is checked against."""


# -- spec automata ---------------------------------------------------------------------

@dataclass(frozen=True)
class Pattern:
    """Edge pattern; ``None`` fields are wildcards.  ``Pattern()`` is ``*``."""

    src: str | None = None
    letter: str | None = None
    dst: str | None = None

    def __str__(self) -> str:
        if self == Pattern():
            return "*"
        return f"({self.src or '_'} {self.letter or '_'} {self.dst or '_'})"


@dataclass(frozen=True)
class SpecAutomaton:
    kind: str  # "nbw" or "nfw"
    states: tuple[str, ...]
    initial: frozenset[str]
    accepting: frozenset[str]
    transitions: tuple[tuple[str, Pattern, str], ...]


def parse_spec(text: str) -> SpecAutomaton:
    kind = None
    states: list[str] = []
    initial: set[str] = set()
    accepting: set[str] = set()
    trans: list[tuple[str, Pattern, str]] = []
    seen_trans = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        words = line.split()
        head = words[0]
        if head == "spec":
            if kind is not None or len(words) != 2 or words[1] not in ("nbw", "nfw"):
                raise ParseError("expected 'spec nbw' or 'spec nfw' once", lineno, col)
            kind = words[1]
        elif head == "state":
            if len(words) < 2 or not NAME_RE.fullmatch(words[1]):
                raise ParseError("bad state name", lineno, col + 6)
            if words[1] in states:
                raise ParseError(f"duplicate state {words[1]}", lineno, col + 6)
            states.append(words[1])
            for flag in words[2:]:
                if flag == "init":
                    initial.add(words[1])
                elif flag == "accepting":
                    accepting.add(words[1])
                else:
                    raise ParseError(f"unknown state flag {flag}", lineno, line.index(flag) + 1)
        elif head == "trans":
            body = line.strip()[len("trans"):].strip()
            src, _, rest = body.partition(" ")
            rest = rest.strip()
            if rest.startswith("*"):
                pat, tail = Pattern(), rest[1:].strip()
            elif rest.startswith("("):
                close = rest.find(")")
                if close < 0:
                    raise ParseError("unclosed pattern", lineno, line.index("(") + 1)
                fields = rest[1:close].split()
                if len(fields) != 3:
                    raise ParseError("pattern needs three fields", lineno, line.index("(") + 1)
                vals = [None if f == "_" else f for f in fields]
                if vals[1] is not None and vals[1] != BROADCAST:
                    try:
                        parse_letter(vals[1])
                    except ValueError as exc:
                        raise ParseError(str(exc), lineno, line.index("(") + 1) from None
                pat, tail = Pattern(*vals), rest[close + 1:].strip()
            else:
                raise ParseError("expected '*' or '(src letter dst)'", lineno, col)
            if src not in states or tail not in states:
                bad = src if src not in states else tail
                raise ParseError(f"undeclared state {bad}", lineno, line.index(bad, col) + 1 if bad else col)
            key = (src, pat, tail)
            if key in seen_trans:
                raise ParseError("duplicate transition", lineno, col)
            seen_trans.add(key)
            trans.append(key)
        else:
            raise ParseError(f"unknown directive {head}", lineno, col)
    if kind is None:
        raise ParseError("missing 'spec' header", 1, 1)
    if not initial:
        raise ParseError("no initial state", 1, 1)
    return SpecAutomaton(kind, tuple(states), frozenset(initial), frozenset(accepting), tuple(trans))


@dataclass(frozen=True)
class Matcher:
    """Matches spec patterns against template edges, optionally through aliases.

    ``letters`` maps template letters to spec letters and ``states`` maps
    template states to spec states; used for reduced timed templates.
    """

    letters: Mapping[str, str] = field(default_factory=dict)
    states: Mapping[str, str] = field(default_factory=dict)

    def _state_ok(self, want: str | None, have: str) -> bool:
        return want is None or want == have or self.states.get(have) == want

    def matches(self, p: Pattern, e: Edge) -> bool:
        if p.letter is not None and p.letter != e.letter and self.letters.get(e.letter) != p.letter:
            return False
        return self._state_ok(p.src, e.src) and self._state_ok(p.dst, e.dst)


def validate_spec(spec: SpecAutomaton, t: ProcessTemplate, matcher: Matcher = Matcher()) -> None:
    known_states = set(t.states) | set(matcher.states.values())
    known_letters = {e.letter for e in t.edges} | set(matcher.letters.values()) | {BROADCAST}
    for src, p, dst in spec.transitions:
        for s in (p.src, p.dst):
            if s is not None and s not in known_states:
                raise SpecError(f"pattern {p} refers to unknown state {s}")
        if p.letter is not None and p.letter not in known_letters:
            raise SpecError(f"pattern {p} refers to unknown letter {p.letter}")


def lasso_spec(prefix: Sequence[Edge], cycle: Sequence[Edge]) -> SpecAutomaton:
    """An automaton accepting exactly ``prefix cycle^omega``."""
    if not cycle:
        raise ValueError("empty cycle")
    word = list(prefix) + list(cycle)
    names = tuple(f"i{j}" for j in range(len(word)))
    trans = []
    for j, e in enumerate(word):
        nxt = j + 1 if j + 1 < len(word) else len(prefix)
        trans.append((names[j], Pattern(e.src, e.letter, e.dst), names[nxt]))
    return SpecAutomaton("nbw", names, frozenset({names[0]}), frozenset(names), tuple(trans))


# -- counter automata ------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    src: object
    label: Edge
    op: str
    dst: object


@dataclass
class BoundedCounterAutomaton:
    states: list
    initial: set
    transitions: list[Transition]
    buchi: list[frozenset]
    counters: int = 1

    def successors(self) -> dict[object, list[Transition]]:
        out: dict[object, list[Transition]] = {s: [] for s in self.states}
        for tr in self.transitions:
            out.setdefault(tr.src, []).append(tr)
        return out

    def copy_transitions(self, copy: int) -> list[Transition]:
        return [tr for tr in self.transitions if tr.src[0] == copy and tr.dst[0] == copy]


def build_ainf(u: Unwinding, colors: Mapping[str, str]) -> BoundedCounterAutomaton:
    missing = [e.id for e in u.edges if e.id not in colors]
    if missing:
        raise ValueError(f"classification misses edges: {missing}")
    tpl = u.template
    states = [(i, s) for i in (1, 2, 3) for s in tpl.states]
    trans: list[Transition] = []
    for e in u.edges:
        a, c = e.annotated, colors[e.id]
        c = getattr(c, "value", c)
        trans.append(Transition((1, a.src), e.base, NOOP, (1, a.dst)))
        if c in ("green", "orange"):
            op = NOOP if c == "green" else (RESET if e.is_broadcast else INC)
            trans.append(Transition((2, a.src), e.base, op, (2, a.dst)))
            trans.append(Transition((1, a.src), e.base, op, (2, a.dst)))
        if c in ("green", "blue"):
            trans.append(Transition((3, a.src), e.base, NOOP, (3, a.dst)))
            trans.append(Transition((1, a.src), e.base, NOOP, (3, a.dst)))
    buchi = frozenset(s for s in states if s[0] in (2, 3))
    return BoundedCounterAutomaton(states, {(1, s) for s in tpl.init}, trans, [buchi])


def intersect(a: BoundedCounterAutomaton, spec: SpecAutomaton, matcher: Matcher = Matcher()) -> BoundedCounterAutomaton:
    """Synchronous product, built over the reachable part only."""
    by_src: dict[str, list[tuple[Pattern, str]]] = {}
    for s, p, d in spec.transitions:
        by_src.setdefault(s, []).append((p, d))
    succ = a.successors()
    init = [(q, p) for q in sorted(a.initial, key=str) for p in spec.states if p in spec.initial]
    seen = set(init)
    order = list(init)
    queue = deque(init)
    trans: list[Transition] = []
    while queue:
        q, p = queue.popleft()
        for tr in succ.get(q, ()):
            for pat, p2 in by_src.get(p, ()):
                if matcher.matches(pat, tr.label):
                    node = (tr.dst, p2)
                    trans.append(Transition((q, p), tr.label, tr.op, node))
                    if node not in seen:
                        seen.add(node)
                        order.append(node)
                        queue.append(node)
    buchi = [frozenset(x for x in order if x[0] in b) for b in a.buchi]
    buchi.append(frozenset(x for x in order if x[1] in spec.accepting))
    return BoundedCounterAutomaton(order, set(init), trans, buchi, a.counters)


# -- emptiness ----------------------------------------------------------------------------------

@dataclass
class Lasso:
    prefix: list[Transition]
    cycle: list[Transition]

    @property
    def prefix_word(self) -> list[Edge]:
        return [t.label for t in self.prefix]

    @property
    def cycle_word(self) -> list[Edge]:
        return [t.label for t in self.cycle]


@dataclass
class EmptinessResult:
    empty: bool
    lasso: Lasso | None
    states: int
    transitions: int
    sccs: int


def _check_ops(a: BoundedCounterAutomaton) -> None:
    if a.counters != 1:
        raise UnsupportedFeature(f"{a.counters} counters; only one is supported")
    bad = {t.op for t in a.transitions} - SUPPORTED_OPS
    if bad:
        raise UnsupportedFeature(f"counter operations {sorted(bad)} are not supported")


def _reachable_graph(a: BoundedCounterAutomaton) -> tuple[nx.MultiDiGraph, dict]:
    succ = a.successors()
    rank = {}
    queue = deque(sorted(a.initial, key=str))
    for s in queue:
        rank[s] = len(rank)
    g = nx.MultiDiGraph()
    g.add_nodes_from(queue)
    while queue:
        s = queue.popleft()
        for tr in succ.get(s, ()):
            if tr.dst not in rank:
                rank[tr.dst] = len(rank)
                queue.append(tr.dst)
            g.add_edge(s, tr.dst, tr=tr)
    return g, rank


def _walk(g, a, b, inside: set, allow: Callable[[Transition], bool]) -> list[Transition] | None:
    if a == b:
        return []
    prev = {a: None}
    queue = deque([a])
    while queue:
        x = queue.popleft()
        for _, y, d in g.out_edges(x, data=True):
            if y in prev or y not in inside or not allow(d["tr"]):
                continue
            prev[y] = d["tr"]
            if y == b:
                out = []
                while prev[y] is not None:
                    out.append(prev[y])
                    y = prev[y].src
                return out[::-1]
            queue.append(y)
    return None


def _candidates(g, rank, buchi, rng: random.Random | None = None):
    """Yield (kind, scc nodes, mandatory transition, allowed-predicate) for accepting SCCs."""
    sccs = sorted((sorted(c, key=rank.get) for c in nx.strongly_connected_components(g)),
                  key=lambda c: rank[c[0]])
    found = []
    for comp in sccs:
        inside = set(comp)
        if not all(inside & b for b in buchi):
            continue
        internal = [d["tr"] for x in comp for _, y, d in g.out_edges(x, data=True) if y in inside]
        resets = [t for t in internal if t.op == RESET]
        if resets:
            found.append(("A", inside, resets, lambda t: True))
    for comp in sccs:
        inside = set(comp)
        if not all(inside & b for b in buchi):
            continue
        sub = nx.MultiDiGraph()
        sub.add_nodes_from(comp)
        sub.add_edges_from((x, y, d) for x in comp for _, y, d in g.out_edges(x, data=True)
                           if y in inside and d["tr"].op != INC)
        for piece in sorted((sorted(c, key=rank.get) for c in nx.strongly_connected_components(sub)),
                            key=lambda c: rank[c[0]]):
            pin = set(piece)
            if not all(pin & b for b in buchi):
                continue
            internal = [d["tr"] for x in piece for _, y, d in sub.out_edges(x, data=True) if y in pin]
            if internal:
                found.append(("B", pin, internal, lambda t: t.op != INC))
    return found


def _cycle_through(g, inside, first: Transition, buchi, allow, rng=None) -> list[Transition]:
    cycle = [first]
    cur = first.dst
    reps = []
    for b in buchi:
        pool = sorted(inside & b, key=str)
        reps.append(rng.choice(pool) if rng else pool[0])
    if rng:
        extra = sorted(inside, key=str)
        reps += [rng.choice(extra) for _ in range(rng.randint(0, 2))]
        rng.shuffle(reps)
    for rep in reps:
        cycle += _walk(g, cur, rep, inside, allow)
        cur = rep
    cycle += _walk(g, cur, first.src, inside, allow)
    return cycle


def _prefix_to(g, rank, a: BoundedCounterAutomaton, target, rng=None) -> list[Transition]:
    reach = set(g.nodes)
    starts = sorted((s for s in a.initial if s in reach), key=rank.get)
    best = None
    for s in starts:
        w = _walk(g, s, target, reach, lambda t: True)
        if w is not None and (best is None or len(w) < len(best)):
            best = w
    if rng is None or best is None:
        return best
    # random detour that can still reach the target
    can_reach = nx.ancestors(g, target) | {target}
    cur = rng.choice([s for s in starts if s in can_reach])
    out = []
    for _ in range(rng.randint(0, 4)):
        opts = [d["tr"] for _, y, d in g.out_edges(cur, data=True) if y in can_reach]
        if not opts:
            break
        tr = opts[rng.randrange(len(opts))]
        out.append(tr)
        cur = tr.dst
    return out + _walk(g, cur, target, reach, lambda t: True)


def check_lasso(a: BoundedCounterAutomaton, lasso: Lasso) -> None:
    """Replay a lasso; raise AssertionError unless it is an accepting run."""
    steps = lasso.prefix + lasso.cycle
    assert lasso.cycle, "empty cycle"
    start = lasso.prefix[0].src if lasso.prefix else lasso.cycle[0].src
    assert start in a.initial, "lasso does not start in an initial state"
    known = set(a.transitions)
    for x, y in zip(steps, steps[1:]):
        assert x.dst == y.src, "lasso steps do not chain"
    assert all(t in known for t in steps), "lasso uses a missing transition"
    assert lasso.cycle[-1].dst == lasso.cycle[0].src, "cycle is not closed"
    visited = {t.src for t in lasso.cycle}
    for b in a.buchi:
        assert visited & b, "cycle misses a Buchi set"
    ops = {t.op for t in lasso.cycle}
    assert RESET in ops or INC not in ops, "counter unbounded along the cycle"


def emptiness(a: BoundedCounterAutomaton) -> EmptinessResult:
    _check_ops(a)
    g, rank = _reachable_graph(a)
    nsccs = nx.number_strongly_connected_components(g)
    stats = (g.number_of_nodes(), g.number_of_edges(), nsccs)
    for kind, inside, mandatory, allow in _candidates(g, rank, a.buchi):
        first = mandatory[0]
        cycle = _cycle_through(g, inside, first, a.buchi, allow)
        lasso = Lasso(_prefix_to(g, rank, a, first.src), cycle)
        check_lasso(a, lasso)
        return EmptinessResult(False, lasso, *stats)
    return EmptinessResult(True, None, *stats)


def sample_lassos(a: BoundedCounterAutomaton, count: int, rng: random.Random) -> list[Lasso]:
    """Random accepting lassos (all self-checked); empty list if the language is empty."""
    _check_ops(a)
    g, rank = _reachable_graph(a)
    cands = _candidates(g, rank, a.buchi)
    out = []
    if not cands:
        return out
    for _ in range(count):
        kind, inside, mandatory, allow = rng.choice(cands)
        first = rng.choice(mandatory)
        cycle = _cycle_through(g, inside, first, a.buchi, allow, rng)
        lasso = Lasso(_prefix_to(g, rank, a, first.src, rng), cycle)
        check_lasso(a, lasso)
        out.append(lasso)
    return out


def accepts_lasso(a: BoundedCounterAutomaton, prefix: Sequence[Edge], cycle: Sequence[Edge]) -> bool:
    return not emptiness(intersect(a, lasso_spec(prefix, cycle))).empty


# -- verdicts -----------------------------------------------------------------------------------

@dataclass
class Verdict:
    status: str  # "holds" or "violated"
    prefix: list[Edge] | None = None
    cycle: list[Edge] | None = None
    realized_at_n: int | None = None
    states: int = 0
    transitions: int = 0
    sccs: int = 0
    ms: float | None = None

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def to_json(self, timings: bool = False) -> dict:
        cex = None
        if self.prefix is not None:
            cex = {"prefix": [e.id for e in self.prefix], "cycle": [e.id for e in (self.cycle or [])]}
        return {
            "status": self.status,
            "counterexample": cex,
            "realized_at_n": self.realized_at_n,
            "stats": {
                "states": self.states,
                "transitions": self.transitions,
                "sccs": self.sccs,
                "ms": round(self.ms, 3) if timings and self.ms is not None else None,
            },
        }


def check_liveness(t: ProcessTemplate, bad: SpecAutomaton, matcher: Matcher = Matcher(),
                   budget=None, realize: bool = True, jobs: int = 1) -> Verdict:
    from .classify import classify
    from .oracle import SearchBudget, realize_lasso

    if bad.kind != "nbw":
        raise SpecError("liveness needs an 'nbw' specification")
    validate_spec(bad, t, matcher)
    t0 = time.perf_counter()
    u = build_unwinding(t)
    colors = classify(u, jobs=jobs).colors()
    product = intersect(build_ainf(u, colors), bad, matcher)
    res = emptiness(product)
    v = Verdict("holds" if res.empty else "violated", states=res.states,
                transitions=res.transitions, sccs=res.sccs)
    if res.lasso is not None:
        v.prefix, v.cycle = res.lasso.prefix_word, res.lasso.cycle_word
        if realize:
            found = realize_lasso(t, v.prefix, v.cycle, budget or SearchBudget(max_n=4, max_millis=5000))
            v.realized_at_n = found.n if found else None
    v.ms = (time.perf_counter() - t0) * 1000
    return v


def _safety_product(afin: NFW, spec: SpecAutomaton, matcher: Matcher):
    by_src: dict[str, list[tuple[Pattern, str]]] = {}
    for s, p, d in spec.transitions:
        by_src.setdefault(s, []).append((p, d))
    succ: dict[object, list[tuple[Edge, object]]] = {}
    for s, e, d in afin.transitions:
        succ.setdefault(s, []).append((e, d))
    init = [(q, p) for q in sorted(afin.initial) for p in spec.states if p in spec.initial]
    parent = {x: None for x in init}
    queue = deque(init)
    edges = 0
    while queue:
        node = queue.popleft()
        q, p = node
        if q in afin.accepting and p in spec.accepting:
            word = []
            while parent[node] is not None:
                node, e = parent[node]
                word.append(e)
            return word[::-1], len(parent), edges
        for e, q2 in succ.get(q, ()):
            for pat, p2 in by_src.get(p, ()):
                if matcher.matches(pat, e):
                    edges += 1
                    nxt = (q2, p2)
                    if nxt not in parent:
                        parent[nxt] = (node, e)
                        queue.append(nxt)
    return None, len(parent), edges


def check_safety(t: ProcessTemplate, bad_prefix: SpecAutomaton, matcher: Matcher = Matcher(),
                 budget=None, realize: bool = True) -> Verdict:
    from .oracle import SearchBudget, realize_finite

    if bad_prefix.kind != "nfw":
        raise SpecError("safety needs an 'nfw' specification")
    validate_spec(bad_prefix, t, matcher)
    t0 = time.perf_counter()
    u = build_unwinding(t)
    word, nstates, nedges = _safety_product(build_afin(u), bad_prefix, matcher)
    v = Verdict("holds" if word is None else "violated", states=nstates, transitions=nedges)
    if word is not None:
        v.prefix, v.cycle = word, []
        if realize:
            found = realize_finite(t, word, budget or SearchBudget(max_n=4, max_millis=5000))
            v.realized_at_n = found.n if found else None
    v.ms = (time.perf_counter() - t0) * 1000
    return v
