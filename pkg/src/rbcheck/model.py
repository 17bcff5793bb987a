"""Process templates, configurations and the explicit semantics of RB-systems.

An RB-system is ``n`` copies of a finite template that move either by a
``k``-wise rendezvous (``k`` distinct processes each take the edge of one
letter ``a.1 .. a.k`` of an action ``a``) or by a symmetric broadcast in
which every process takes some ``b``-labelled edge.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

BROADCAST = "b"
NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class EnumerationLimit(RuntimeError):
    """Raised when a capped enumeration would exceed its limit."""


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    action: str
    index: int
    dst: str

    @classmethod
    def broadcast(cls, src: str, dst: str) -> "Edge":
        return cls(src, BROADCAST, 0, dst)

    @property
    def is_broadcast(self) -> bool:
        return self.action == BROADCAST

    @property
    def letter(self) -> str:
        return BROADCAST if self.is_broadcast else f"{self.action}.{self.index}"

    @property
    def id(self) -> str:
        return f"{self.src}:{self.letter}:{self.dst}"

    def __str__(self) -> str:
        return self.id


def parse_letter(text: str) -> tuple[str, int]:
    if text == BROADCAST:
        return BROADCAST, 0
    action, dot, index = text.rpartition(".")
    if not dot or not NAME_RE.match(action) or not index.isdigit():
        raise ValueError(f"malformed letter {text!r}")
    if action == BROADCAST:
        raise ValueError(f"'{BROADCAST}' is reserved for broadcast")
    return action, int(index)


def parse_edge_id(text: str) -> Edge:
    """Inverse of ``Edge.id`` (``src:letter:dst``)."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"malformed edge id {text!r}")
    action, index = parse_letter(parts[1])
    return Edge(parts[0], action, index, parts[2])


@dataclass(frozen=True)
class RendezvousAction:
    name: str
    letters: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.letters)


@dataclass(frozen=True)
class ProcessTemplate:
    k: int
    states: tuple[str, ...]
    init: frozenset[str]
    edges: tuple[Edge, ...]
    r_only: bool = False

    @property
    def actions(self) -> tuple[RendezvousAction, ...]:
        names: list[str] = []
        for e in self.edges:
            if not e.is_broadcast and e.action not in names:
                names.append(e.action)
        return tuple(
            RendezvousAction(a, tuple(f"{a}.{j}" for j in range(1, self.k + 1)))
            for a in names
        )

    def edges_from(self, state: str, letter: str | None = None) -> tuple[Edge, ...]:
        return tuple(
            e for e in self._by_src().get(state, ()) if letter is None or e.letter == letter
        )

    def broadcast_edges(self, state: str) -> tuple[Edge, ...]:
        return self.edges_from(state, BROADCAST)

    def letter_edges(self, action: str, index: int) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.action == action and e.index == index)

    def _by_src(self) -> dict[str, tuple[Edge, ...]]:
        cache = self.__dict__.get("_src_index")
        if cache is None:
            grouped: dict[str, list[Edge]] = {}
            for e in self.edges:
                grouped.setdefault(e.src, []).append(e)
            cache = {s: tuple(es) for s, es in grouped.items()}
            object.__setattr__(self, "_src_index", cache)
        return cache

    @property
    def unique_letters(self) -> bool:
        seen = Counter(e.letter for e in self.edges if not e.is_broadcast)
        return all(c == 1 for c in seen.values())

    def state_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}


def validate_template(t: ProcessTemplate, strict: bool = False) -> list[str]:
    """Return human-readable diagnostics; an empty list means well formed.

    ``strict`` additionally demands one edge per rendezvous letter.
    """
    diags: list[str] = []
    if t.k < 2:
        diags.append(f"arity: k must be >= 2, got {t.k}")
    states = set(t.states)
    if len(states) != len(t.states):
        diags.append("states: duplicate state identifiers")
    if not t.init:
        diags.append("init: initial set is empty")
    for s in sorted(t.init - states):
        diags.append(f"init: initial state {s} is not declared")
    for e in t.edges:
        for end in (e.src, e.dst):
            if end not in states:
                diags.append(f"edge {e.id}: endpoint {end} is not declared")
        if not e.is_broadcast and not 1 <= e.index <= t.k:
            diags.append(f"edge {e.id}: letter index {e.index} outside 1..{t.k}")
        if e.is_broadcast and t.r_only:
            diags.append(f"edge {e.id}: broadcast edge in an r_only template")
    if not t.r_only:
        has_b = {e.src for e in t.edges if e.is_broadcast}
        for s in t.states:
            if s not in has_b:
                diags.append(f"state {s}: missing broadcast edge")
    if strict:
        counts = Counter(e.letter for e in t.edges if not e.is_broadcast)
        for letter, c in sorted(counts.items()):
            if c > 1:
                diags.append(f"letter {letter}: labels {c} edges (unique_letters required)")
    return diags


# -- text format --------------------------------------------------------------

def _columns(raw: str, words: list[str]) -> list[int]:
    """1-based start column of each word of a line."""
    cols, pos = [], 0
    for w in words:
        pos = raw.index(w, pos)
        cols.append(pos + 1)
        pos += len(w)
    return cols


def parse_template(text: str) -> ProcessTemplate:
    k: int | None = None
    r_only = False
    seen_system = False
    states: list[str] = []
    init: set[str] = set()
    edges: list[Edge] = []
    where: dict[Edge, tuple[int, list[int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        words = line.split()
        if not words:
            continue
        cols = _columns(raw, words)
        head = words[0]

        def fail(msg: str, w: int = 0):
            raise ParseError(msg, lineno, cols[min(w, len(cols) - 1)])

        if head == "system":
            if seen_system:
                fail("duplicate system line")
            seen_system = True
            if words[1:2] != ["rb"]:
                fail("expected 'system rb' or 'system rb r_only'", 1)
            if words[2:] == ["r_only"]:
                r_only = True
            elif words[2:]:
                fail(f"unexpected {' '.join(words[2:])!r}", 2)
        elif head == "k":
            if k is not None:
                fail("duplicate k line")
            if len(words) != 2 or not words[1].isdigit() or int(words[1]) < 2:
                fail("expected 'k <integer >= 2>'", 1)
            k = int(words[1])
        elif head == "state":
            if len(words) not in (2, 3) or (len(words) == 3 and words[2] != "init"):
                fail("expected 'state <name> [init]'", 2 if len(words) > 2 else 0)
            name = words[1]
            if not NAME_RE.match(name) or name == BROADCAST:
                fail(f"bad state name {name!r}", 1)
            if name in states:
                fail(f"duplicate state {name}", 1)
            states.append(name)
            if len(words) == 3:
                init.add(name)
        elif head == "edge":
            if len(words) != 4:
                fail("expected 'edge <src> <letter> <dst>'")
            try:
                action, index = parse_letter(words[2])
            except ValueError as exc:
                fail(str(exc), 2)
            if k is not None and not (action == BROADCAST or 1 <= index <= k):
                fail(f"letter index {index} outside 1..{k}", 2)
            e = Edge(words[1], action, index, words[3])
            if e in where:
                fail(f"duplicate edge {e.id}")
            where[e] = (lineno, cols)
            edges.append(e)
        else:
            fail(f"unknown directive {head!r}")
    if not seen_system:
        raise ParseError("missing 'system rb' line", 1, 1)
    if k is None:
        raise ParseError("missing 'k' line", 1, 1)
    t = ProcessTemplate(k, tuple(states), frozenset(init), tuple(edges), r_only)
    for e in t.edges:
        lineno, cols = where[e]
        for end, w in ((e.src, 1), (e.dst, 3)):
            if end not in states:
                raise ParseError(f"edge {e.id}: undeclared state {end}", lineno, cols[w])
        if not (e.is_broadcast or 1 <= e.index <= k):
            raise ParseError(f"letter index {e.index} outside 1..{k}", lineno, cols[2])
    return t


def format_template(t: ProcessTemplate) -> str:
    lines = ["system rb r_only" if t.r_only else "system rb", f"k {t.k}"]
    for s in t.states:
        lines.append(f"state {s} init" if s in t.init else f"state {s}")
    for e in t.edges:
        lines.append(f"edge {e.src} {e.letter} {e.dst}")
    return "\n".join(lines) + "\n"


# -- configurations and global transitions -----------------------------------

@dataclass(frozen=True)
class Configuration:
    """Assignment of template states to process ids (any finite set of naturals)."""

    items: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError("a configuration needs at least one process")
        pids = [p for p, _ in self.items]
        if list(pids) != sorted(set(pids)):
            object.__setattr__(self, "items", tuple(sorted(dict(self.items).items())))

    @classmethod
    def of(cls, states: Sequence[str], start: int = 1) -> "Configuration":
        return cls(tuple((start + i, s) for i, s in enumerate(states)))

    @classmethod
    def from_map(cls, assignment: Mapping[int, str]) -> "Configuration":
        return cls(tuple(sorted(assignment.items())))

    def __getitem__(self, pid: int) -> str:
        return self.as_dict()[pid]

    def __len__(self) -> int:
        return len(self.items)

    def as_dict(self) -> dict[int, str]:
        d = self.__dict__.get("_dict")
        if d is None:
            d = dict(self.items)
            object.__setattr__(self, "_dict", d)
        return d

    @property
    def pids(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.items)

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(s for _, s in self.items)

    def counts(self, order: Sequence[str]) -> tuple[int, ...]:
        c = Counter(self.states)
        return tuple(c.get(s, 0) for s in order)

    def updated(self, changes: Mapping[int, str]) -> "Configuration":
        d = dict(self.items)
        d.update(changes)
        return Configuration(tuple(sorted(d.items())))

    def renamed(self, perm: Mapping[int, int]) -> "Configuration":
        return Configuration(tuple(sorted((perm[p], s) for p, s in self.items)))

    def __str__(self) -> str:
        return "(" + ",".join(self.states) + ")"


@dataclass(frozen=True)
class GlobalTransition:
    src: Configuration
    action: str
    moves: tuple[tuple[int, Edge], ...]
    dst: Configuration

    @property
    def is_broadcast(self) -> bool:
        return self.action == BROADCAST

    @property
    def label(self):
        if self.is_broadcast:
            return BROADCAST
        return tuple((pid, e.letter) for pid, e in self.moves)

    @property
    def moved(self) -> frozenset[int]:
        return frozenset(pid for pid, _ in self.moves)

    def edge_of(self, pid: int) -> Edge | None:
        for p, e in self.moves:
            if p == pid:
                return e
        return None

    def renamed(self, perm: Mapping[int, int]) -> "GlobalTransition":
        moves = tuple((perm[p], e) for p, e in self.moves)
        if self.is_broadcast:
            moves = tuple(sorted(moves))
        return GlobalTransition(self.src.renamed(perm), self.action, moves, self.dst.renamed(perm))

    def __str__(self) -> str:
        if self.is_broadcast:
            lab = BROADCAST
        else:
            lab = "(" + ",".join(f"({p},{e.letter})" for p, e in self.moves) + ")"
        return f"{self.src} -{lab}-> {self.dst}"


def make_rendezvous(f: Configuration, moves: Sequence[tuple[int, Edge]]) -> GlobalTransition:
    return GlobalTransition(f, moves[0][1].action, tuple(moves), f.updated({p: e.dst for p, e in moves}))


def make_broadcast(f: Configuration, choice: Mapping[int, Edge]) -> GlobalTransition:
    moves = tuple(sorted(choice.items()))
    return GlobalTransition(f, BROADCAST, moves, f.updated({p: e.dst for p, e in moves}))


def successors(t: ProcessTemplate, f: Configuration, limit: int | None = None) -> list[GlobalTransition]:
    """All global transitions out of ``f``.

    Broadcasts enumerate every combination of per-process broadcast edges;
    ``limit`` caps how many combinations may be produced.
    """
    out: list[GlobalTransition] = []
    pids = f.pids
    fmap = f.as_dict()
    choices = [t.broadcast_edges(fmap[p]) for p in pids]
    if all(choices):
        total = 1
        for c in choices:
            total *= len(c)
        if limit is not None and total > limit:
            raise EnumerationLimit(f"{total} broadcast combinations exceed limit {limit}")
        for combo in itertools.product(*choices):
            out.append(make_broadcast(f, dict(zip(pids, combo))))
    for act in t.actions:
        for chosen in itertools.permutations(pids, t.k):
            options = [t.edges_from(fmap[p], act.letters[j]) for j, p in enumerate(chosen)]
            if not all(options):
                continue
            for combo in itertools.product(*options):
                out.append(make_rendezvous(f, list(zip(chosen, combo))))
    return out


def is_transition(t: ProcessTemplate, step: GlobalTransition) -> bool:
    """Check one global transition against the template without enumerating."""
    edges = set(t.edges)
    f, g = step.src, step.dst
    fmap, gmap = f.as_dict(), g.as_dict()
    if set(fmap) != set(gmap):
        return False
    for pid, e in step.moves:
        if pid not in fmap or e not in edges or fmap[pid] != e.src or gmap[pid] != e.dst:
            return False
    if step.is_broadcast:
        return step.moved == frozenset(fmap) and all(e.is_broadcast for _, e in step.moves)
    if len(step.moves) != t.k or len(step.moved) != t.k:
        return False
    for j, (_, e) in enumerate(step.moves, start=1):
        if e.is_broadcast or e.action != step.action or e.index != j:
            return False
    return all(fmap[p] == gmap[p] for p in fmap if p not in step.moved)


def is_path(t: ProcessTemplate, path: Sequence[GlobalTransition]) -> bool:
    for a, b in zip(path, path[1:]):
        if a.dst != b.src:
            return False
    return all(is_transition(t, step) for step in path)


def initial_configurations(t: ProcessTemplate, n: int) -> Iterator[Configuration]:
    init = [s for s in t.states if s in t.init]
    for combo in itertools.product(init, repeat=n):
        yield Configuration.of(combo)


def project_run(run: Sequence[GlobalTransition], pid: int) -> list[Edge]:
    if run and pid not in run[0].src.as_dict():
        raise KeyError(f"process {pid} does not occur in the run")
    out = []
    for step in run:
        e = step.edge_of(pid)
        if e is not None:
            out.append(e)
    return out


def twins(f: Configuration, g: Configuration) -> bool:
    return Counter(f.states) == Counter(g.states)


def is_pseudo_cycle(path: Sequence[GlobalTransition]) -> bool:
    if not path:
        raise ValueError("a pseudo-cycle is a nonempty path")
    return twins(path[0].src, path[-1].dst)


def twin_matching(f: Configuration, g: Configuration) -> dict[int, int]:
    """Bijection ``beta`` with ``g[beta[p]] == f[p]``; greedy in pid order."""
    if not twins(f, g):
        raise ValueError("configurations are not twins")
    pool: dict[str, list[int]] = {}
    for p, s in g.items:
        pool.setdefault(s, []).append(p)
    beta = {}
    for p, s in f.items:
        beta[p] = pool[s].pop(0)
    return beta


def _compose_perm(outer: Mapping[int, int], inner: Mapping[int, int]) -> dict[int, int]:
    return {p: outer[inner[p]] for p in inner}


def pump_pseudo_cycle(path: Sequence[GlobalTransition], iterations: int | None = None):
    """Replay a pseudo-cycle ``iterations`` times, renaming processes each lap.

    ``iterations=None`` returns an infinite iterator; an int returns a list.
    """
    if not path or not is_pseudo_cycle(path):
        raise ValueError("pump_pseudo_cycle requires a pseudo-cycle")
    beta = twin_matching(path[0].src, path[-1].dst)

    def laps() -> Iterator[GlobalTransition]:
        perm = {p: p for p in path[0].src.pids}
        while True:
            for step in path:
                yield step.renamed(perm)
            perm = _compose_perm(beta, perm)

    stream = laps()
    if iterations is None:
        return stream
    return list(itertools.islice(stream, len(path) * iterations))


def pumping_period(path: Sequence[GlobalTransition]) -> int:
    """Number of laps after which the renaming returns to the identity."""
    beta = twin_matching(path[0].src, path[-1].dst)
    perm = dict(beta)
    laps = 1
    while any(perm[p] != p for p in perm):
        perm = _compose_perm(beta, perm)
        laps += 1
    return laps


def broadcast_count(run: Iterable[GlobalTransition]) -> int:
    return sum(1 for step in run if step.is_broadcast)


def compose_runs(runs: Sequence[Sequence[GlobalTransition]], schedule: Sequence | None = None) -> list[GlobalTransition]:
    """Simulate several runs with disjoint process groups inside one larger run.

    Group ``g``'s processes are renamed by offsetting them past every earlier
    group.  ``schedule`` lists group indices (advance that group by one
    rendezvous step) and ``"b"`` (one merged broadcast, allowed only when
    every group is at a broadcast).  Without a schedule the inter-broadcast
    segments are interleaved round-robin.
    """
    if not runs:
        raise ValueError("nothing to compose")
    counts = {broadcast_count(r) for r in runs}
    if len(counts) != 1:
        raise ValueError(f"runs have different broadcast counts {sorted(counts)}")
    renamings: list[dict[int, int]] = []
    offset = 0
    for r in runs:
        if not r:
            raise ValueError("cannot compose an empty run")
        pids = r[0].src.pids
        renamings.append({p: offset + i + 1 for i, p in enumerate(pids)})
        offset += len(pids)
    if schedule is None:
        schedule = _round_robin(runs)
    if len(runs) == 1 and list(schedule) == [BROADCAST if s.is_broadcast else 0 for s in runs[0]]:
        return list(runs[0])
    cursor = [0] * len(runs)
    state: dict[int, str] = {}
    for r, ren in zip(runs, renamings):
        for p, s in r[0].src.items:
            state[ren[p]] = s
    out: list[GlobalTransition] = []
    for entry in schedule:
        f = Configuration.from_map(state)
        if entry == BROADCAST:
            choice: dict[int, Edge] = {}
            for g, r in enumerate(runs):
                if cursor[g] >= len(r) or not r[cursor[g]].is_broadcast:
                    raise ValueError(f"broadcast barrier violated: group {g} is not at a broadcast")
                for p, e in r[cursor[g]].moves:
                    choice[renamings[g][p]] = e
                cursor[g] += 1
            step = make_broadcast(f, choice)
        else:
            g = int(entry)
            r = runs[g]
            if cursor[g] >= len(r):
                raise ValueError(f"schedule advances exhausted group {g}")
            if r[cursor[g]].is_broadcast:
                raise ValueError(f"broadcast barrier violated: group {g} scheduled past its broadcast")
            step = make_rendezvous(f, [(renamings[g][p], e) for p, e in r[cursor[g]].moves])
            cursor[g] += 1
        state.update({p: e.dst for p, e in step.moves})
        out.append(step)
    if any(c != len(r) for c, r in zip(cursor, runs)):
        raise ValueError("schedule does not complete every run")
    return out


def _round_robin(runs: Sequence[Sequence[GlobalTransition]]) -> list:
    segments = []
    for r in runs:
        segs: list[list[int]] = [[]]
        for step in r:
            if step.is_broadcast:
                segs.append([])
            else:
                segs[-1].append(1)
        segments.append(segs)
    schedule: list = []
    for i in range(len(segments[0])):
        remaining = [len(segs[i]) for segs in segments]
        while any(remaining):
            for g, left in enumerate(remaining):
                if left:
                    schedule.append(g)
                    remaining[g] -= 1
        if i < len(segments[0]) - 1:
            schedule.append(BROADCAST)
    return schedule
