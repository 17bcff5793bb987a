"""Reachability-unwinding: saturated components arranged in a lasso.

Component ``i`` keeps the rendezvous edges that can actually fire once the
states ``I_i`` are populated; broadcast edges lead from component ``i`` to
``i + 1`` and from the last component back to the first one of the loop.
Annotated states are written ``s@i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import (
    BROADCAST,
    Configuration,
    Edge,
    GlobalTransition,
    ProcessTemplate,
    broadcast_count,
)


class LiftError(ValueError):
    """A path of the base system has no counterpart in the unwinding."""


def annotate(state: str, comp: int) -> str:
    return f"{state}@{comp}"


def strip(state: str) -> str:
    return state.rpartition("@")[0] or state


def strip_edge(e: Edge) -> Edge:
    return Edge(strip(e.src), e.action, e.index, strip(e.dst))


@dataclass(frozen=True)
class Component:
    index: int
    init: frozenset[str]
    states: tuple[str, ...]
    edges: tuple[Edge, ...]


def saturate(t: ProcessTemplate, init: Iterable[str], index: int = 0) -> Component:
    init = frozenset(init)
    states = set(init)
    kept: set[Edge] = set()
    rendezvous = [e for e in t.edges if not e.is_broadcast]
    changed = True
    while changed:
        changed = False
        sourced = {(e.action, e.index) for e in rendezvous if e.src in states}
        for e in rendezvous:
            if e in kept or e.src not in states:
                continue
            if all((e.action, j) in sourced for j in range(1, t.k + 1)):
                kept.add(e)
                if e.dst not in states:
                    states.add(e.dst)
                    changed = True
        # a new state can enable further letters; repeat until stable
    return Component(
        index,
        init,
        tuple(s for s in t.states if s in states),
        tuple(e for e in t.edges if e in kept),
    )


@dataclass(frozen=True)
class UnwindingEdge:
    base: Edge
    src_comp: int
    dst_comp: int

    @property
    def id(self) -> str:
        return f"{self.base.id}@comp{self.src_comp}"

    @property
    def is_broadcast(self) -> bool:
        return self.base.is_broadcast

    @property
    def annotated(self) -> Edge:
        b = self.base
        return Edge(annotate(b.src, self.src_comp), b.action, b.index, annotate(b.dst, self.dst_comp))


@dataclass(frozen=True)
class Unwinding:
    base: ProcessTemplate
    components: tuple[Component, ...]
    prefix: int
    edges: tuple[UnwindingEdge, ...] = field(repr=False)

    @property
    def n(self) -> int:
        return self.prefix

    @property
    def m(self) -> int:
        return len(self.components) - 1

    @property
    def period(self) -> int:
        return self.m + 1 - self.prefix

    r = period

    @property
    def loop(self) -> tuple[Component, ...]:
        return self.components[self.prefix:]

    def comp(self, i: int) -> int:
        return comp(i, self)

    def edge(self, edge_id: str) -> UnwindingEdge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(f"unknown unwinding edge {edge_id}")

    @property
    def template(self) -> ProcessTemplate:
        """The unwinding as a process template over annotated states."""
        cached = self.__dict__.get("_template")
        if cached is None:
            states = tuple(annotate(s, c.index) for c in self.components for s in c.states)
            init = frozenset(annotate(s, 0) for s in self.components[0].init)
            cached = ProcessTemplate(self.base.k, states, init,
                                     tuple(e.annotated for e in self.edges), self.base.r_only)
            object.__setattr__(self, "_template", cached)
        return cached

    def by_annotated(self) -> dict[Edge, UnwindingEdge]:
        cached = self.__dict__.get("_by_annotated")
        if cached is None:
            cached = {e.annotated: e for e in self.edges}
            object.__setattr__(self, "_by_annotated", cached)
        return cached

    def rendezvous_edges(self, comp_index: int) -> list[UnwindingEdge]:
        return [e for e in self.edges if not e.is_broadcast and e.src_comp == comp_index]

    def broadcast_edges(self, comp_index: int) -> list[UnwindingEdge]:
        return [e for e in self.edges if e.is_broadcast and e.src_comp == comp_index]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "r": self.period,
            "m": self.m,
            "components": [
                {
                    "index": c.index,
                    "init": [s for s in c.states if s in c.init] + sorted(c.init - set(c.states)),
                    "states": list(c.states),
                    "edges": [e.id for e in self.rendezvous_edges(c.index)],
                }
                for c in self.components
            ],
            "broadcast_edges": [e.id for e in self.edges if e.is_broadcast],
        }

    def to_dot(self, colors: dict[str, str] | None = None) -> str:
        palette = {"red": "red", "blue": "blue", "green": "darkgreen", "orange": "orange"}
        lines = ["digraph unwinding {", "  rankdir=LR;"]
        for c in self.components:
            lines.append(f"  subgraph cluster_{c.index} {{")
            lines.append(f'    label="P{c.index}";')
            for s in c.states:
                shape = "doublecircle" if c.index == 0 and s in c.init else "circle"
                lines.append(f'    "{annotate(s, c.index)}" [label="{s}", shape={shape}];')
            lines.append("  }")
        for e in self.edges:
            a = e.annotated
            attrs = [f'label="{e.base.letter}"']
            if e.is_broadcast:
                attrs.append("style=dashed")
            if colors and e.id in colors:
                attrs.append(f'color="{palette.get(colors[e.id], colors[e.id])}"')
            lines.append(f'  "{a.src}" -> "{a.dst}" [{", ".join(attrs)}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_unwinding(t: ProcessTemplate) -> Unwinding:
    inits: list[frozenset[str]] = []
    comps: list[Component] = []
    current = frozenset(t.init)
    while current not in inits:
        inits.append(current)
        c = saturate(t, current, len(comps))
        comps.append(c)
        current = frozenset(e.dst for s in c.states for e in t.broadcast_edges(s))
    prefix = inits.index(current)
    m = len(comps) - 1
    edges: list[UnwindingEdge] = []
    for c in comps:
        edges.extend(UnwindingEdge(e, c.index, c.index) for e in c.edges)
    for c in comps:
        target = c.index + 1 if c.index < m else prefix
        for s in c.states:
            edges.extend(UnwindingEdge(e, c.index, target) for e in t.broadcast_edges(s))
    return Unwinding(t, tuple(comps), prefix, tuple(edges))


def comp(i: int, u: Unwinding) -> int:
    n, r = u.prefix, u.period
    return i if i < n else n + (i - n) % r


def lift_run(run: Sequence[GlobalTransition], u: Unwinding) -> list[GlobalTransition]:
    """Annotate every state with the component of the current broadcast count."""
    out: list[GlobalTransition] = []
    known = u.by_annotated()
    comp_states = {c.index: set(c.states) for c in u.components}
    b = 0
    for pos, step in enumerate(run):
        here = comp(b, u)
        there = comp(b + 1, u) if step.is_broadcast else here
        for pid, s in step.src.items:
            if s not in comp_states[here]:
                raise LiftError(f"step {pos}: process {pid} in {s}, not a state of component {here}")
        moves = []
        for pid, e in step.moves:
            lifted = Edge(annotate(e.src, here), e.action, e.index, annotate(e.dst, there))
            if lifted not in known:
                raise LiftError(f"step {pos}: edge {e.id} is absent from component {here}")
            moves.append((pid, lifted))
        moved = step.moved
        src = Configuration(tuple((p, annotate(s, here)) for p, s in step.src.items))
        dst = Configuration(tuple(
            (p, annotate(s, there if (step.is_broadcast or p in moved) else here))
            for p, s in step.dst.items))
        out.append(GlobalTransition(src, step.action, tuple(moves), dst))
        if step.is_broadcast:
            b += 1
    return out


def project_circ(run: Sequence[GlobalTransition]) -> list[GlobalTransition]:
    out = []
    for step in run:
        src = Configuration(tuple((p, strip(s)) for p, s in step.src.items))
        dst = Configuration(tuple((p, strip(s)) for p, s in step.dst.items))
        out.append(GlobalTransition(src, step.action, tuple((p, strip_edge(e)) for p, e in step.moves), dst))
    return out


@dataclass(frozen=True)
class NFW:
    """Nondeterministic finite-word automaton over template edges."""

    states: tuple
    initial: frozenset
    accepting: frozenset
    transitions: tuple[tuple[object, Edge, object], ...]

    def step(self, current: Iterable, letter: Edge) -> frozenset:
        cur = set(current)
        return frozenset(d for s, a, d in self.transitions if s in cur and a == letter)

    def accepts(self, word: Sequence[Edge]) -> bool:
        cur = frozenset(self.initial)
        for letter in word:
            cur = self.step(cur, letter)
            if not cur:
                return False
        return bool(cur & self.accepting)

    def words(self, max_len: int) -> set[tuple[Edge, ...]]:
        """All accepted words up to ``max_len`` letters."""
        out: set[tuple[Edge, ...]] = set()
        layer = {(): frozenset(self.initial)}
        succ: dict[object, list[tuple[Edge, object]]] = {}
        for s, a, d in self.transitions:
            succ.setdefault(s, []).append((a, d))
        for length in range(max_len + 1):
            nxt: dict[tuple[Edge, ...], set] = {}
            for w, cur in layer.items():
                if cur & self.accepting:
                    out.add(w)
                if length == max_len:
                    continue
                for s in cur:
                    for a, d in succ.get(s, ()):
                        nxt.setdefault(w + (a,), set()).add(d)
            layer = {w: frozenset(c) for w, c in nxt.items()}
        return out


def build_afin(u: Unwinding) -> NFW:
    tpl = u.template
    transitions = tuple((e.annotated.src, e.base, e.annotated.dst) for e in u.edges)
    return NFW(tpl.states, tpl.init, frozenset(tpl.states), transitions)


def unwinding_json(u: Unwinding) -> str:
    return json.dumps(u.to_json(), indent=2, sort_keys=True) + "\n"
