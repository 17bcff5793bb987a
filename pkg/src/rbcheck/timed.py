"""Discrete timed networks and their reduction to RB-templates.

Clock values above the largest constant of a clock are collapsed into ``TOP``.
A time unit becomes a broadcast on which every process ticks its clocks;
guards are decided per abstract valuation and pushed into the states.  Each
combination of concrete letter edges of a timed action gets a fresh action
name, so the output has one edge per letter.
"""

from __future__ import annotations

import itertools
import json
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .model import (
    BROADCAST,
    NAME_RE,
    Edge,
    ParseError,
    ProcessTemplate,
    parse_letter,
)


class _Top:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "TOP"

    def __reduce__(self):
        return (_Top, ())


TOP = _Top()
Value = Union[int, _Top]


class ReductionBudgetError(ValueError):
    """The abstract state space is larger than the configured cap."""


# -- guards -------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Pred:
    op: str  # "lt": c < x, "eq": c = x
    const: int
    clock: str


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and", "or", "not"
    args: tuple


Guard = Union[Const, Pred, BoolOp]

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _tokens(text: str, offset: int) -> list[tuple[str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        tok = m.group(1) or m.group(2) or m.group(3)
        out.append((tok, offset + m.start(m.lastindex)))
        pos = m.end()
    return out


def parse_guard(text: str, clocks: Iterable[str] | None = None, line: int | None = None,
                column: int = 1) -> tuple[Guard, int]:
    """Parse one s-expression guard; return it and the number of characters used.

    ``column`` is the 1-based column of ``text[0]`` in the source line.
    """
    toks = _tokens(text, column)
    known = set(clocks) if clocks is not None else None
    pos = 0

    def err(msg, col):
        raise ParseError(msg, line, col)

    def expr():
        nonlocal pos
        if pos >= len(toks):
            err("unexpected end of guard", column + len(text))
        tok, col = toks[pos]
        pos += 1
        if tok == "true":
            return Const(True)
        if tok == "false":
            return Const(False)
        if tok == ")":
            err("unexpected ')'", col)
        if tok != "(":
            err(f"unexpected token {tok!r}", col)
        if pos >= len(toks):
            err("unexpected end of guard", column + len(text))
        op, ocol = toks[pos]
        pos += 1
        if op in ("lt", "eq"):
            args = []
            while pos < len(toks) and toks[pos][0] != ")":
                args.append(toks[pos])
                pos += 1
            if len(args) != 2:
                err(f"({op} c x) takes a constant and a clock", ocol)
            (c, ccol), (x, xcol) = args
            if not c.isdigit():
                err(f"expected a natural constant, got {c!r}", ccol)
            if not NAME_RE.match(x):
                err(f"bad clock name {x!r}", xcol)
            if known is not None and x not in known:
                err(f"undeclared clock {x}", xcol)
            node = Pred(op, int(c), x)
        elif op in ("and", "or", "not"):
            args = []
            while pos < len(toks) and toks[pos][0] != ")":
                args.append(expr())
            if op == "not" and len(args) != 1:
                err("(not g) takes one argument", ocol)
            node = BoolOp(op, tuple(args))
        else:
            err(f"unknown guard operator {op!r}", ocol)
        if pos >= len(toks):
            err("missing ')'", column + len(text))
        pos += 1
        return node

    g = expr()
    used = len(text) if pos >= len(toks) else toks[pos][1] - column
    return g, used


def guard_clocks(g: Guard) -> set[str]:
    if isinstance(g, Pred):
        return {g.clock}
    if isinstance(g, BoolOp):
        return set().union(*(guard_clocks(a) for a in g.args)) if g.args else set()
    return set()


def guard_constants(g: Guard) -> dict[str, int]:
    """Largest constant compared against each clock."""
    if isinstance(g, Pred):
        return {g.clock: g.const}
    out: dict[str, int] = {}
    if isinstance(g, BoolOp):
        for a in g.args:
            for x, c in guard_constants(a).items():
                out[x] = max(out.get(x, 0), c)
    return out


def format_guard(g: Guard) -> str:
    if isinstance(g, Const):
        return "true" if g.value else "false"
    if isinstance(g, Pred):
        return f"({g.op} {g.const} {g.clock})"
    return "(" + " ".join([g.op] + [format_guard(a) for a in g.args]) + ")"


def eval_guard(g: Guard, v: Mapping[str, Value]) -> bool:
    """Evaluate over abstract (or concrete) clock values; ``TOP`` exceeds every constant."""
    if isinstance(g, Const):
        return g.value
    if isinstance(g, Pred):
        if g.clock not in v:
            raise KeyError(f"undeclared clock {g.clock}")
        x = v[g.clock]
        if x is TOP:
            return g.op == "lt"
        return g.const < x if g.op == "lt" else g.const == x
    if g.op == "and":
        return all(eval_guard(a, v) for a in g.args)
    if g.op == "or":
        return any(eval_guard(a, v) for a in g.args)
    return not eval_guard(g.args[0], v)


def tick(v: Mapping[str, Value], cmax: Mapping[str, int]) -> dict[str, Value]:
    out = {}
    for x, val in v.items():
        out[x] = TOP if val is TOP or val + 1 > cmax[x] else val + 1
    return out


# -- timed templates -------------------------------------------------------------------

@dataclass(frozen=True)
class TimedEdge:
    src: str
    action: str
    index: int
    dst: str
    guard: Guard
    reset: frozenset[str]

    @property
    def letter(self) -> str:
        return f"{self.action}.{self.index}"


@dataclass(frozen=True)
class TimedTemplate:
    k: int
    states: tuple[str, ...]
    init: frozenset[str]
    clocks: tuple[str, ...]
    cmax: tuple[tuple[str, int], ...]
    edges: tuple[TimedEdge, ...]

    @property
    def cmax_map(self) -> dict[str, int]:
        return dict(self.cmax)


def parse_timed(text: str) -> TimedTemplate:
    header = False
    k = None
    states: list[str] = []
    init: set[str] = set()
    clocks: list[str] = []
    declared_max: dict[str, int | None] = {}
    edges: list[TimedEdge] = []
    seen_edges = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        words = line.split()

        def at(word, start=0):
            return line.index(word, start) + 1

        head = words[0]
        if head == "system":
            if header or words[1:] != ["timed"]:
                raise ParseError("expected 'system timed' once", lineno, col)
            header = True
        elif head == "k":
            if k is not None or len(words) != 2 or not words[1].isdigit() or int(words[1]) < 2:
                raise ParseError("expected 'k <integer >= 2>' once", lineno, col)
            k = int(words[1])
        elif head == "clock":
            if len(words) not in (2, 4) or not NAME_RE.match(words[1]):
                raise ParseError("expected 'clock <name> [max <c>]'", lineno, col)
            if words[1] in clocks:
                raise ParseError(f"duplicate clock {words[1]}", lineno, at(words[1], 5))
            if len(words) == 4 and (words[2] != "max" or not words[3].isdigit()):
                raise ParseError("expected 'max <natural>'", lineno, at(words[2], 5))
            clocks.append(words[1])
            declared_max[words[1]] = int(words[3]) if len(words) == 4 else None
        elif head == "state":
            if len(words) < 2 or not NAME_RE.match(words[1]) or words[1] == BROADCAST:
                raise ParseError("bad state name", lineno, col + 6)
            if words[1] in states:
                raise ParseError(f"duplicate state {words[1]}", lineno, at(words[1], 5))
            states.append(words[1])
            for flag in words[2:]:
                if flag != "init":
                    raise ParseError(f"unknown state flag {flag}", lineno, at(flag, 5))
                init.add(words[1])
        elif head == "edge":
            if len(words) < 4:
                raise ParseError("expected 'edge <src> <letter> <dst> [guard g] [reset ...]'", lineno, col)
            src, letter, dst = words[1:4]
            for s in (src, dst):
                if s not in states:
                    raise ParseError(f"undeclared state {s}", lineno, at(s, 4))
            if letter == BROADCAST:
                raise ParseError("timed templates have no broadcast edges", lineno, at(letter, 4))
            try:
                action, index = parse_letter(letter)
            except ValueError as exc:
                raise ParseError(str(exc), lineno, at(letter, 4)) from None
            if k is None or not 1 <= index <= k:
                raise ParseError(f"letter index outside 1..{k}", lineno, at(letter, 4))
            tail_start = line.index(dst, line.index(letter) + len(letter)) + len(dst)
            rest = line[tail_start:]
            guard: Guard = Const(True)
            reset: frozenset[str] = frozenset()
            stripped = rest.lstrip()
            offset = tail_start + (len(rest) - len(stripped))
            gcol = offset + 1
            if stripped.startswith("guard"):
                body = stripped[len("guard"):]
                body_l = body.lstrip()
                gcol = offset + len("guard") + (len(body) - len(body_l)) + 1
                guard, used = parse_guard(body_l, clocks, lineno, gcol)
                stripped = body_l[used:].lstrip()
                offset = line.index(stripped, gcol - 1) if stripped else len(line)
            if stripped:
                parts = stripped.split()
                if parts[0] != "reset" or len(parts) < 2:
                    raise ParseError("expected 'reset -' or 'reset <clocks>'", lineno, offset + 1)
                if parts[1:] != ["-"]:
                    for x in parts[1:]:
                        if x not in clocks:
                            raise ParseError(f"undeclared clock {x}", lineno, line.index(x, offset) + 1)
                    reset = frozenset(parts[1:])
            for x, c in guard_constants(guard).items():
                m = declared_max.get(x)
                if m is not None and c > m:
                    raise ParseError(f"constant {c} exceeds max {m} of clock {x}", lineno, gcol)
            e = TimedEdge(src, action, index, dst, guard, reset)
            if e in seen_edges:
                raise ParseError("duplicate edge", lineno, col)
            seen_edges.add(e)
            edges.append(e)
        else:
            raise ParseError(f"unknown directive {head}", lineno, col)
    if not header:
        raise ParseError("missing 'system timed' header", 1, 1)
    if k is None:
        raise ParseError("missing 'k' line", 1, 1)
    if not init:
        raise ParseError("no initial state", 1, 1)
    found: dict[str, int] = {}
    for e in edges:
        for x, c in guard_constants(e.guard).items():
            found[x] = max(found.get(x, 0), c)
    cmax = tuple((x, declared_max[x] if declared_max[x] is not None else found.get(x, 0)) for x in clocks)
    return TimedTemplate(k, tuple(states), frozenset(init), tuple(clocks), cmax, tuple(edges))


# -- reduction ---------------------------------------------------------------------------------

def valuations(t: TimedTemplate, cmax: Mapping[str, int]) -> list[tuple[Value, ...]]:
    ranges = [list(range(cmax[x] + 1)) + [TOP] for x in t.clocks]
    return [tuple(v) for v in itertools.product(*ranges)]


def state_name(q: str, clocks: Sequence[str], v: Sequence[Value]) -> str:
    return q + "".join(f"__{x}_{'T' if val is TOP else val}" for x, val in zip(clocks, v))


def split_state_name(name: str) -> str:
    """The location part of a reduced state name."""
    return name.split("__", 1)[0]


@dataclass
class Reduction:
    template: ProcessTemplate
    relabel: dict[str, dict]
    cmax: dict[str, int]

    def letter_aliases(self) -> dict[str, str]:
        out = {}
        for new, info in self.relabel.items():
            for j in range(1, self.template.k + 1):
                out[f"{new}.{j}"] = f"{info['orig_action']}.{j}"
        return out

    def state_aliases(self) -> dict[str, str]:
        return {s: split_state_name(s) for s in self.template.states}

    def relabel_json(self) -> str:
        return json.dumps(self.relabel, indent=2, sort_keys=True) + "\n"


def reduce_to_rb(t: TimedTemplate, cap: int = 100_000, cmax_override: int | None = None) -> Reduction:
    cmax = {x: (cmax_override if cmax_override is not None else c) for x, c in t.cmax}
    vals = valuations(t, cmax)
    size = len(t.states) * len(vals)
    if size > cap:
        raise ReductionBudgetError(
            f"reduced template would have {len(t.states)} locations x {len(vals)} valuations "
            f"= {size} states, above the cap of {cap}")
    clocks = t.clocks
    names = {(q, v): state_name(q, clocks, v) for q in t.states for v in vals}
    zero = tuple(0 for _ in clocks)
    edges: list[Edge] = []
    relabel: dict[str, dict] = {}
    taken = set(t.states)
    actions = []
    for e in t.edges:
        if e.action not in actions:
            actions.append(e.action)
    for a in actions:
        per_letter = []
        for j in range(1, t.k + 1):
            options = []
            for e in t.edges:
                if e.action != a or e.index != j:
                    continue
                for v in vals:
                    val = dict(zip(clocks, v))
                    if eval_guard(e.guard, val):
                        after = tuple(0 if x in e.reset else val[x] for x in clocks)
                        options.append((names[(e.src, v)], names[(e.dst, after)]))
            per_letter.append(options)
        for i, combo in enumerate(itertools.product(*per_letter)):
            new = f"{a}__{i}"
            if new in relabel:
                raise ValueError(f"relabelled action name {new} clashes")
            letter_edges = []
            for j, (s, d) in enumerate(combo, 1):
                e = Edge(s, new, j, d)
                edges.append(e)
                letter_edges.append(e.id)
            relabel[new] = {"orig_action": a, "letter_edges": letter_edges}
    for q in t.states:
        for v in vals:
            nxt = tuple(tick(dict(zip(clocks, v)), cmax).values())
            edges.append(Edge.broadcast(names[(q, v)], names[(q, nxt)]))
    states = tuple(names[(q, v)] for q in t.states for v in vals)
    init = frozenset(names[(q, zero)] for q in t.init)
    tpl = ProcessTemplate(t.k, states, init, tuple(edges), False)
    return Reduction(tpl, relabel, cmax)


# -- concrete semantics (oracle) -----------------------------------------------------------------

def concrete_exec_fin(t: TimedTemplate, n: int, depth: int, cmax: Mapping[str, int] | None = None) -> set[tuple]:
    """Process-1 words of all runs of at most ``depth`` global steps with integer clocks.

    Letters are ``(src, letter, dst)`` where states carry the abstracted clock
    values (names as in the reduction), so words are comparable with those of
    the reduced template.  A time step is the letter ``b``.
    """
    cm = dict(cmax) if cmax is not None else dict(t.cmax)
    clocks = t.clocks

    def name(q, v):
        return state_name(q, clocks, tuple(TOP if x > cm[c] else x for c, x in zip(clocks, v)))

    by_letter: dict[str, list[TimedEdge]] = {}
    for e in t.edges:
        by_letter.setdefault(e.letter, []).append(e)
    actions = sorted({e.action for e in t.edges})
    zero = tuple(0 for _ in clocks)
    frontier = {(tuple((q,) + (zero,) for q in combo), ())
                for combo in itertools.product(sorted(t.init), repeat=n)}
    words = {w for _, w in frontier}
    for _ in range(depth):
        nxt = set()
        for conf, w in frontier:
            ticked = tuple((q, tuple(x + 1 for x in v)) for q, v in conf)
            nxt.add((ticked, w + ((name(*conf[0]), BROADCAST, name(*ticked[0])),)))
            for a in actions:
                for procs in itertools.permutations(range(n), t.k):
                    choices = []
                    for j, p in enumerate(procs, 1):
                        q, v = conf[p]
                        val = dict(zip(clocks, v))
                        choices.append([e for e in by_letter.get(f"{a}.{j}", ())
                                        if e.src == q and eval_guard(e.guard, val)])
                    for combo in itertools.product(*choices):
                        new = list(conf)
                        letter1 = None
                        for p, e in zip(procs, combo):
                            q, v = conf[p]
                            after = tuple(0 if c in e.reset else x for c, x in zip(clocks, v))
                            new[p] = (e.dst, after)
                            if p == 0:
                                letter1 = (name(q, v), e.letter, name(e.dst, after))
                        new = tuple(new)
                        nxt.add((new, w + (letter1,) if letter1 else w))
        frontier = nxt
        words |= {w for _, w in frontier}
    return words


def reduced_words(red: Reduction, words: Iterable[Sequence[Edge]]) -> set[tuple]:
    """Translate words over the reduced template back to original letters."""
    aliases = red.letter_aliases()
    out = set()
    for w in words:
        out.add(tuple((e.src, aliases.get(e.letter, e.letter), e.dst) for e in w))
    return out
