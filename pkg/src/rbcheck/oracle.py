"""Explicit-state ground truth for RB-systems at fixed instance sizes.

Most searches run on the twin quotient: a vertex is the vector of per-state
process counts.  Where the identity of one process matters (its projection),
process 1 is kept distinguished and only the others are counted.  Every
path handed back to callers is materialised with concrete process ids and
re-checked against the template.
"""

from __future__ import annotations

import itertools
import os
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import networkx as nx

from .model import (
    BROADCAST,
    Configuration,
    Edge,
    GlobalTransition,
    ProcessTemplate,
    broadcast_count,
    initial_configurations,
    is_path,
    is_pseudo_cycle,
    make_broadcast,
    make_rendezvous,
    project_run,
    successors,
)
from .ratvas import action_instances
from .unwinding import Unwinding, UnwindingEdge


@dataclass(frozen=True)
class SearchBudget:
    max_n: int = 4
    max_depth: int = 64
    max_states: int = 200_000
    max_millis: int = 60_000

    def __post_init__(self):
        for name in ("max_n", "max_depth", "max_states", "max_millis"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_env(cls, **kw) -> "SearchBudget":
        ms = os.environ.get("RBCHECK_BUDGET_MS")
        if ms:
            kw["max_millis"] = int(ms)
        return cls(**kw)


class _Clock:
    def __init__(self, budget: SearchBudget):
        self.deadline = time.monotonic() + budget.max_millis / 1000

    def expired(self) -> bool:
        return time.monotonic() > self.deadline


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def distributions(total: int, slots: int) -> list[tuple[int, ...]]:
    return list(compositions(total, slots)) if slots else ([()] if total == 0 else [])


class CountSystem:
    """Successor generation on count vectors of a template."""

    def __init__(self, t: ProcessTemplate):
        self.t = t
        self.order = t.states
        self.index = {s: i for i, s in enumerate(t.states)}
        d = len(self.order)
        self.instances: list[tuple[Edge, ...]] = []
        for act in t.actions:
            self.instances.extend(action_instances(act.name, t.edges, t.k))
        self.needs = []
        self.effects = []
        for inst in self.instances:
            need = [0] * d
            eff = [0] * d
            for e in inst:
                need[self.index[e.src]] += 1
                eff[self.index[e.src]] -= 1
                eff[self.index[e.dst]] += 1
            self.needs.append(tuple(need))
            self.effects.append(tuple(eff))
        self.bedges = [t.broadcast_edges(s) for s in self.order]

    def initial_vectors(self, n: int) -> list[tuple[int, ...]]:
        init_idx = [self.index[s] for s in self.order if s in self.t.init]
        out = []
        for dist in distributions(n, len(init_idx)):
            v = [0] * len(self.order)
            for i, x in zip(init_idx, dist):
                v[i] = x
            out.append(tuple(v))
        return out

    def vector_of(self, f: Configuration) -> tuple[int, ...]:
        return f.counts(self.order)

    def successors(self, c: tuple[int, ...]):
        """Yield ``(descriptor, next_vector, used_edges, is_broadcast)``."""
        for i, (need, eff) in enumerate(zip(self.needs, self.effects)):
            if all(x >= y for x, y in zip(c, need)):
                yield ("r", i, None), tuple(x + y for x, y in zip(c, eff)), frozenset(self.instances[i]), False
        yield from self._broadcasts(c, None)

    def _broadcasts(self, c, tracked_edge):
        per_state = []
        for i, x in enumerate(c):
            if x == 0:
                continue
            edges = self.bedges[i]
            if not edges:
                return
            per_state.append([(i, edges, dist) for dist in distributions(x, len(edges))])
        if tracked_edge is not None and not tracked_edge.is_broadcast:
            return
        for combo in itertools.product(*per_state):
            nxt = list(c)
            used = set()
            parts = []
            for i, edges, dist in combo:
                nxt[i] -= sum(dist)
                for e, cnt in zip(edges, dist):
                    if cnt:
                        nxt[self.index[e.dst]] += cnt
                        used.add(e)
                        parts.append((e, cnt))
            yield ("b", tuple(parts), None), tuple(nxt), frozenset(used), True

    def tracked_successors(self, s1: str, c: tuple[int, ...]):
        """Moves with process 1 (in ``s1``) distinguished from the counted others.

        Yields ``(descriptor, (s1', next_counts), edge_of_process_1 | None, is_broadcast)``.
        """
        for i, (need, eff) in enumerate(zip(self.needs, self.effects)):
            inst = self.instances[i]
            if all(x >= y for x, y in zip(c, need)):
                yield ("r", i, None), (s1, tuple(x + y for x, y in zip(c, eff))), None, False
            for j, e in enumerate(inst):
                if e.src != s1:
                    continue
                si, di = self.index[e.src], self.index[e.dst]
                need2 = list(need)
                need2[si] -= 1
                if all(x >= y for x, y in zip(c, need2)):
                    eff2 = list(eff)
                    eff2[si] += 1
                    eff2[di] -= 1
                    yield ("r", i, j), (e.dst, tuple(x + y for x, y in zip(c, eff2))), e, False
        for e1 in self.t.broadcast_edges(s1):
            for (kind, parts, _), nxt, used, _b in self._broadcasts(c, e1):
                yield ("b", parts, e1), (e1.dst, nxt), e1, True

    # -- materialisation --------------------------------------------------------

    def start_config(self, c: Sequence[int], s1: str | None = None) -> Configuration:
        states = [] if s1 is None else [s1]
        for s, x in zip(self.order, c):
            states.extend([s] * x)
        return Configuration.of(states)

    def materialise(self, f: Configuration, descs: Iterable, tracked: bool = False) -> list[GlobalTransition]:
        out = []
        for desc in descs:
            step = self._materialise_step(f, desc, tracked)
            out.append(step)
            f = step.dst
        return out

    def _materialise_step(self, f: Configuration, desc, tracked: bool) -> GlobalTransition:
        fmap = f.as_dict()
        if desc[0] == "r":
            _, i, j1 = desc
            inst = self.instances[i]
            chosen: list[int] = []
            for j, e in enumerate(inst):
                if tracked and j == j1:
                    chosen.append(1)
                    continue
                pid = next(p for p in f.pids
                           if fmap[p] == e.src and p not in chosen and not (tracked and p == 1))
                chosen.append(pid)
            return make_rendezvous(f, list(zip(chosen, inst)))
        _, parts, e1 = desc
        choice: dict[int, Edge] = {}
        if tracked:
            choice[1] = e1
        pools: dict[str, list[int]] = {}
        for p in f.pids:
            if p not in choice:
                pools.setdefault(fmap[p], []).append(p)
        for e, cnt in parts:
            for _ in range(cnt):
                choice[pools[e.src].pop(0)] = e
        return make_broadcast(f, choice)


# -- explicit enumeration --------------------------------------------------------

@dataclass
class StateGraph:
    vertices: list[Configuration]
    edges: list[GlobalTransition]
    truncated: bool = False

    def to_dot(self, limit: int = 500) -> str:
        lines = ["digraph states {"]
        ids = {v: i for i, v in enumerate(self.vertices[:limit])}
        for v, i in ids.items():
            lines.append(f'  v{i} [label="{v}"];')
        for e in self.edges:
            if e.src in ids and e.dst in ids:
                lab = BROADCAST if e.is_broadcast else e.action
                lines.append(f'  v{ids[e.src]} -> v{ids[e.dst]} [label="{lab}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def enumerate_states(t: ProcessTemplate, n: int, budget: SearchBudget = SearchBudget()) -> StateGraph:
    """BFS over explicit configurations of the ``n``-process instance."""
    clock = _Clock(budget)
    starts = list(initial_configurations(t, n))
    seen = {f: 0 for f in starts}
    order = list(starts)
    edges: list[GlobalTransition] = []
    queue = deque(starts)
    truncated = False
    while queue:
        f = queue.popleft()
        depth = seen[f]
        if depth >= budget.max_depth or clock.expired():
            truncated = truncated or any(True for _ in successors(t, f))
            continue
        for step in successors(t, f, limit=budget.max_states):
            edges.append(step)
            if step.dst not in seen:
                if len(seen) >= budget.max_states:
                    truncated = True
                    continue
                seen[step.dst] = depth + 1
                order.append(step.dst)
                queue.append(step.dst)
    return StateGraph(order, edges, truncated)


@dataclass
class WordSet:
    words: set[tuple[Edge, ...]]
    truncated: bool = False


def exec_fin(t: ProcessTemplate, n: int, maxlen: int, budget: SearchBudget = SearchBudget()) -> WordSet:
    """Process-1 projections of all runs with at most ``maxlen`` global steps."""
    cs = CountSystem(t)
    clock = _Clock(budget)
    frontier: set = set()
    for s1 in (s for s in t.states if s in t.init):
        for c in cs.initial_vectors(n - 1):
            frontier.add(((s1, c), ()))
    words = {w for _, w in frontier}
    truncated = False
    for _ in range(maxlen):
        nxt = set()
        for (s1, c), w in frontier:
            for _desc, v2, e1, _b in cs.tracked_successors(s1, c):
                nxt.add((v2, w + (e1,) if e1 is not None else w))
        frontier = nxt
        words |= {w for _, w in frontier}
        if len(frontier) > budget.max_states or clock.expired():
            truncated = True
            break
    return WordSet(words, truncated)


def executions_upto(t: ProcessTemplate, n: int, length: int, budget: SearchBudget = SearchBudget()) -> WordSet:
    """Process-1 words of at most ``length`` edges, other processes moving freely."""
    cs = CountSystem(t)
    clock = _Clock(budget)
    graph: dict = {}
    truncated = False

    def succ(v):
        if v not in graph:
            graph[v] = [(v2, e1) for _d, v2, e1, _b in cs.tracked_successors(*v)]
        return graph[v]

    def closure(vs):
        seen = set(vs)
        stack = list(vs)
        while stack:
            v = stack.pop()
            for v2, e1 in succ(v):
                if e1 is None and v2 not in seen:
                    seen.add(v2)
                    stack.append(v2)
        return frozenset(seen)

    start = [(s1, c) for s1 in t.states if s1 in t.init for c in cs.initial_vectors(n - 1)]
    layer = {(): closure(start)}
    words = {()}
    for _ in range(length):
        nxt: dict = {}
        for w, vs in layer.items():
            for v in vs:
                for v2, e1 in succ(v):
                    if e1 is not None:
                        nxt.setdefault(w + (e1,), set()).add(v2)
        layer = {w: closure(vs) for w, vs in nxt.items()}
        words |= set(layer)
        if len(graph) > budget.max_states or clock.expired():
            truncated = True
            break
    return WordSet(words, truncated)


# -- count graphs, pseudo-cycles ------------------------------------------------------

@dataclass
class CountGraph:
    system: CountSystem
    n: int
    graph: nx.MultiDiGraph
    parent: dict
    truncated: bool = False

    def path_to(self, v) -> tuple[tuple[int, ...], list]:
        descs = []
        while self.parent[v] is not None:
            u, desc = self.parent[v]
            descs.append(desc)
            v = u
        descs.reverse()
        return v, descs


def count_graph(t: ProcessTemplate, n: int, budget: SearchBudget = SearchBudget(),
                system: CountSystem | None = None) -> CountGraph:
    cs = system or CountSystem(t)
    clock = _Clock(budget)
    g = nx.MultiDiGraph()
    parent: dict = {}
    depth: dict = {}
    queue = deque()
    for c in cs.initial_vectors(n):
        parent[c] = None
        depth[c] = 0
        g.add_node(c)
        queue.append(c)
    truncated = False
    while queue:
        c = queue.popleft()
        if depth[c] >= budget.max_depth or clock.expired():
            truncated = True
            continue
        for desc, c2, used, is_b in cs.successors(c):
            if c2 not in parent:
                if len(parent) >= budget.max_states:
                    truncated = True
                    continue
                parent[c2] = (c, desc)
                depth[c2] = depth[c] + 1
                queue.append(c2)
            g.add_edge(c, c2, desc=desc, used=used, broadcast=is_b)
    return CountGraph(cs, n, g, parent, truncated)


@dataclass
class PseudoCycle:
    n: int
    prefix: list[GlobalTransition]
    cycle: list[GlobalTransition]

    @property
    def broadcasts(self) -> int:
        return broadcast_count(self.cycle)


def _scc_index(g) -> dict:
    index = {}
    for i, comp in enumerate(nx.strongly_connected_components(g)):
        for v in comp:
            index[v] = i
    return index


def _shortest_descs(g, a, b, allow) -> list:
    """Descriptors of a shortest walk from a to b using edges accepted by ``allow``."""
    if a == b:
        return []
    prev = {a: None}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        for _, v, data in g.out_edges(u, data=True):
            if v in prev or not allow(data):
                continue
            prev[v] = (u, data["desc"])
            if v == b:
                out = []
                while prev[v] is not None:
                    u2, d = prev[v]
                    out.append(d)
                    v = u2
                return out[::-1]
            queue.append(v)
    raise ValueError("no path")


def cycle_kinds(cg: CountGraph, edges: Iterable[Edge]) -> dict[Edge, dict[str, tuple | None]]:
    """For each annotated edge, a witnessing closed walk of each kind (or None).

    Kinds: ``"broadcast_free"`` and ``"with_broadcast"``.  A closed walk in
    the count graph is a pseudo-cycle of the explicit system.
    """
    g = cg.graph
    free = nx.MultiDiGraph()
    free.add_nodes_from(g.nodes)
    free.add_edges_from((u, v, d) for u, v, d in g.edges(data=True) if not d["broadcast"])
    full_idx = _scc_index(g)
    free_idx = _scc_index(free)
    scc_broadcast = {}
    for u, v, d in g.edges(data=True):
        if d["broadcast"] and full_idx[u] == full_idx[v]:
            scc_broadcast.setdefault(full_idx[u], (u, v, d["desc"]))
    wanted = set(edges)
    out: dict[Edge, dict[str, tuple | None]] = {e: {"broadcast_free": None, "with_broadcast": None} for e in wanted}
    for u, v, d in g.edges(data=True):
        hits = wanted & d["used"]
        if not hits:
            continue
        for e in hits:
            slot = out[e]
            if slot["broadcast_free"] is None and not d["broadcast"] and free_idx[u] == free_idx[v]:
                slot["broadcast_free"] = (u, v, d["desc"])
            if slot["with_broadcast"] is None and full_idx[u] == full_idx[v]:
                if d["broadcast"]:
                    slot["with_broadcast"] = (u, v, d["desc"])
                elif full_idx[u] in scc_broadcast:
                    slot["with_broadcast"] = (u, v, d["desc"])
    return out


def _close_walk(cg: CountGraph, hit, kind: str) -> tuple[tuple[int, ...], list]:
    g = cg.graph
    u, v, desc = hit
    if kind == "broadcast_free":
        return u, [desc] + _shortest_descs(g, v, u, lambda d: not d["broadcast"])
    if desc[0] == "b":
        return u, [desc] + _shortest_descs(g, v, u, lambda d: True)
    # shortest walk v -> u that takes at least one broadcast: BFS over (vertex, seen)
    start, goal = (v, False), (u, True)
    prev = {start: None}
    queue = deque([start])
    while queue and goal not in prev:
        x, seen = queue.popleft()
        for _, y, d in g.out_edges(x, data=True):
            nxt = (y, seen or d["broadcast"])
            if nxt not in prev:
                prev[nxt] = ((x, seen), d["desc"])
                queue.append(nxt)
    if goal not in prev:
        raise ValueError("no closing walk with a broadcast")
    out, node = [], goal
    while prev[node] is not None:
        node, d = prev[node]
        out.append(d)
    return u, [desc] + out[::-1]


def materialise_cycle(cg: CountGraph, start, descs) -> PseudoCycle:
    root, prefix_descs = cg.path_to(start)
    cs = cg.system
    f0 = cs.start_config(root)
    prefix = cs.materialise(f0, prefix_descs)
    f = prefix[-1].dst if prefix else f0
    cycle = cs.materialise(f, descs)
    assert is_path(cs.t, prefix + cycle)
    assert is_pseudo_cycle(cycle)
    return PseudoCycle(cg.n, prefix, cycle)


def find_pseudo_cycle(u: Unwinding, e: UnwindingEdge | str, n: int,
                      budget: SearchBudget = SearchBudget(), kind: str = "any") -> PseudoCycle | None:
    """A reachable pseudo-cycle of the ``n``-process unwinding system through ``e``.

    ``kind`` is ``"broadcast_free"``, ``"with_broadcast"`` or ``"any"``.
    """
    if isinstance(e, str):
        e = u.edge(e)
    cg = count_graph(u.template, n, budget)
    hits = cycle_kinds(cg, [e.annotated])[e.annotated]
    kinds = ["broadcast_free", "with_broadcast"] if kind == "any" else [kind]
    for k in kinds:
        if hits[k] is not None:
            start, descs = _close_walk(cg, hits[k], k)
            return materialise_cycle(cg, start, descs)
    return None


def search_pseudo_cycle(u: Unwinding, e: UnwindingEdge | str, budget: SearchBudget = SearchBudget(),
                        kind: str = "any") -> PseudoCycle | None:
    for n in range(1, budget.max_n + 1):
        found = find_pseudo_cycle(u, e, n, budget, kind)
        if found is not None:
            return found
    return None


@dataclass
class OracleEdgeReport:
    broadcast_free: int | None = None  # smallest instance size with a witness
    with_broadcast: int | None = None
    truncated: bool = False


def oracle_edge_kinds(u: Unwinding, budget: SearchBudget = SearchBudget()) -> dict[str, OracleEdgeReport]:
    """Which unwinding edges lie on oracle-found pseudo-cycles, per kind, for sizes up to ``max_n``."""
    reports = {e.id: OracleEdgeReport() for e in u.edges}
    by_ann = {e.annotated: e for e in u.edges}
    cs = CountSystem(u.template)
    for n in range(1, budget.max_n + 1):
        cg = count_graph(u.template, n, budget, cs)
        for ann, hit in cycle_kinds(cg, by_ann).items():
            rep = reports[by_ann[ann].id]
            rep.truncated = rep.truncated or cg.truncated
            if hit["broadcast_free"] is not None and rep.broadcast_free is None:
                rep.broadcast_free = n
            if hit["with_broadcast"] is not None and rep.with_broadcast is None:
                rep.with_broadcast = n
    return reports


def sample_pseudo_cycles(t: ProcessTemplate, n: int, rng, count: int,
                         budget: SearchBudget = SearchBudget()) -> list[PseudoCycle]:
    """Random reachable pseudo-cycles: closed walks inside nontrivial SCCs."""
    cg = count_graph(t, n, budget)
    g = cg.graph
    sccs = [c for c in nx.strongly_connected_components(g)
            if len(c) > 1 or any(v == w for w, v in g.out_edges(next(iter(c))))]
    out: list[PseudoCycle] = []
    if not sccs:
        return out
    sccs.sort(key=lambda c: sorted(c))
    for _ in range(count):
        comp = rng.choice(sccs)
        nodes = sorted(comp)
        start = rng.choice(nodes)
        # random walk inside the SCC, then return along a shortest walk
        descs = []
        cur = start
        for _ in range(rng.randint(1, 6)):
            options = [(v, d["desc"]) for _, v, d in g.out_edges(cur, data=True) if v in comp]
            v, d = options[rng.randrange(len(options))]
            descs.append(d)
            cur = v
        descs += _shortest_descs(g, cur, start, lambda d: True)
        out.append(materialise_cycle(cg, start, descs))
    return out


# -- loading runs ----------------------------------------------------------------------

@dataclass
class LoadingRun:
    n: int
    run: list[GlobalTransition]


def find_loading_run(u: Unwinding, b: int, n_target: int,
                     budget: SearchBudget = SearchBudget()) -> LoadingRun | None:
    """A run of the unwinding system with exactly ``b`` broadcasts that ends with at
    least ``n_target`` processes in every state of component ``comp(b)``."""
    target = u.components[u.comp(b)]
    tpl = u.template
    cs = CountSystem(tpl)
    goal_idx = [cs.index[f"{s}@{target.index}"] for s in target.states]
    return _loading_search(cs, u, b, n_target, goal_idx, budget)


def _loading_search(cs, u, b, n_target, goal_idx, budget) -> LoadingRun | None:
    clock = _Clock(budget)
    for n in range(1, budget.max_n + 1):
        parent = {}
        queue = deque()
        for c in cs.initial_vectors(n):
            parent[(c, 0)] = None
            queue.append((c, 0))
        while queue:
            node = queue.popleft()
            c, nb = node
            if nb == b and all(c[i] >= n_target for i in goal_idx):
                descs = []
                cur = node
                while parent[cur] is not None:
                    cur, d = parent[cur]
                    descs.append(d)
                descs.reverse()
                f0 = cs.start_config(cur[0])
                run = cs.materialise(f0, descs)
                return LoadingRun(n, run)
            if clock.expired() or len(parent) > budget.max_states:
                return None
            for desc, c2, _used, is_b in cs.successors(c):
                nb2 = nb + 1 if is_b else nb
                if nb2 > b:
                    continue
                key = (c2, nb2)
                if key not in parent:
                    parent[key] = (node, desc)
                    queue.append(key)
    return None


# -- lasso and finite-word realisation --------------------------------------------------

@dataclass
class Realization:
    n: int
    prefix: list[GlobalTransition]
    cycle: list[GlobalTransition] = field(default_factory=list)
    truncated: bool = False


def _tracked_product(cs: CountSystem, n: int, word_len: int, expected, advance, budget, clock):
    """BFS over (tracked vertex, word position); returns graph, parents, truncated."""
    g = nx.MultiDiGraph()
    parent = {}
    queue = deque()
    for s1 in (s for s in cs.order if s in cs.t.init):
        for c in cs.initial_vectors(n - 1):
            node = ((s1, c), 0)
            parent[node] = None
            g.add_node(node)
            queue.append(node)
    truncated = False
    while queue:
        node = queue.popleft()
        (s1, c), pos = node
        if clock.expired() or len(parent) > budget.max_states:
            truncated = True
            break
        for desc, v2, e1, _b in cs.tracked_successors(s1, c):
            if e1 is None:
                pos2 = pos
            else:
                exp = expected(pos)
                if exp is None or e1 != exp:
                    continue
                pos2 = advance(pos)
            node2 = (v2, pos2)
            g.add_edge(node, node2, desc=desc, moved=e1 is not None)
            if node2 not in parent:
                parent[node2] = (node, desc)
                queue.append(node2)
    return g, parent, truncated


def _path_from_root(parent, node):
    descs = []
    while parent[node] is not None:
        node, d = parent[node]
        descs.append(d)
    return node, descs[::-1]


def realize_lasso(t: ProcessTemplate, prefix: Sequence[Edge], cycle: Sequence[Edge],
                  budget: SearchBudget = SearchBudget()) -> Realization | None:
    """Find an instance size and a run whose process-1 projection follows
    ``prefix`` then ``cycle`` forever (closed walk on the tracked quotient)."""
    if not cycle:
        raise ValueError("the cycle part of a lasso must be nonempty")
    cs = CountSystem(t)
    clock = _Clock(budget)
    lp, lc = len(prefix), len(cycle)
    word = list(prefix) + list(cycle)

    def expected(pos):
        return word[pos]

    def advance(pos):
        return pos + 1 if pos + 1 < lp + lc else lp

    truncated = False
    for n in range(1, budget.max_n + 1):
        g, parent, trunc = _tracked_product(cs, n, lp + lc, expected, advance, budget, clock)
        truncated |= trunc
        idx = _scc_index(g)
        for a, b, d in g.edges(data=True):
            if d["moved"] and a[1] >= lp and idx[a] == idx[b]:
                root, pre = _path_from_root(parent, a)
                loop = [d["desc"]] + _shortest_descs(g, b, a, lambda _d: True)
                f0 = cs.start_config(root[0][1], root[0][0])
                pre_run = cs.materialise(f0, pre, tracked=True)
                f = pre_run[-1].dst if pre_run else f0
                loop_run = cs.materialise(f, loop, tracked=True)
                assert is_path(t, pre_run + loop_run) and is_pseudo_cycle(loop_run)
                return Realization(n, pre_run, loop_run, truncated)
        if clock.expired():
            break
    return None


def realize_finite(t: ProcessTemplate, word: Sequence[Edge],
                   budget: SearchBudget = SearchBudget()) -> Realization | None:
    """Smallest instance size with a run whose process-1 projection is ``word``."""
    cs = CountSystem(t)
    clock = _Clock(budget)
    lw = len(word)
    for n in range(1, budget.max_n + 1):
        g, parent, trunc = _tracked_product(
            cs, n, lw, lambda p: word[p] if p < lw else None, lambda p: p + 1, budget, clock)
        done = [node for node in parent if node[1] == lw]
        if done:
            root, descs = _path_from_root(parent, sorted(done, key=str)[0])
            f0 = cs.start_config(root[0][1], root[0][0])
            run = cs.materialise(f0, descs, tracked=True)
            assert project_run(run, 1) == list(word) if run else not word
            return Realization(n, run, [], trunc)
        if clock.expired():
            break
    return None


def compare_lifted_runs(t: ProcessTemplate, u: Unwinding, n: int, depth: int) -> list[str]:
    """Mismatches between runs of the base system and projected runs of the unwinding.

    Lifting is deterministic (annotation = component of the broadcast count),
    so run-set equality up to ``depth`` reduces to a step-wise check on every
    pair (configuration, broadcast component) reachable within ``depth - 1``.
    """
    from .unwinding import annotate, comp, strip

    problems: list[str] = []
    utpl = u.template
    starts = list(initial_configurations(t, n))
    frontier = {(f, 0) for f in starts}
    seen = set(frontier)
    for level in range(depth):
        nxt = set()
        for f, b in frontier:
            here = comp(b, u)
            lifted = Configuration(tuple((p, annotate(s, here)) for p, s in f.items))
            base_steps = {(s.label, s.dst) for s in successors(t, f)}
            up_steps = set()
            for s in successors(utpl, lifted):
                dst = Configuration(tuple((p, strip(x)) for p, x in s.dst.items))
                up_steps.add((s.label, dst))
            if base_steps != up_steps:
                problems.append(f"depth {level}: {f} differs: base-only {base_steps - up_steps}, "
                                f"unwinding-only {up_steps - base_steps}")
            for lab, dst in base_steps:
                key = (dst, b + 1 if lab == BROADCAST else b)
                if key not in seen:
                    seen.add(key)
                    nxt.add(key)
        frontier = nxt
    return problems
