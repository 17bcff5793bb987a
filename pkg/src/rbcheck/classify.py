"""Edge colours of the unwinding via LP-based pseudo-cycle detection.

T1(e): some broadcast-free pseudo-cycle uses e.  Inside one component this is
the cone ``sum_a y_a * a# = 0``: loading makes every state of the component
arbitrarily full, so any zero-sum action multiset can be fired from a
reachable configuration and ends in a twin of it.

T2(e): some pseudo-cycle with broadcasts uses e.  Cycles are canonicalised to
one lap around the loop (r broadcasts, starting in the first loop component)
and described by per-segment flows.  Rational solutions can use actions whose
source states never receive any process; ``prune_support`` removes those by an
activation fixpoint in both directions and re-solves.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .model import Edge, GlobalTransition, is_path, is_pseudo_cycle
from .oracle import CountSystem
from .ratvas import (
    LinearSystem,
    action_instances,
    check_solution,
    instance_effect,
    integer_scale,
    lp_feasible,
    max_support_solution,
)
from .unwinding import Component, Unwinding, UnwindingEdge, annotate


class Color(str, enum.Enum):
    RED = "red"
    BLUE = "blue"
    GREEN = "green"
    ORANGE = "orange"


def color_of(t1: bool, t2: bool) -> Color:
    if t1:
        return Color.GREEN if t2 else Color.BLUE
    return Color.ORANGE if t2 else Color.RED


# -- action instances ---------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """One way to fire an action inside a component: an edge per letter."""

    name: str
    action: str
    edges: tuple[Edge, ...]

    def sources(self) -> set[str]:
        return {e.src for e in self.edges}

    def targets(self) -> set[str]:
        return {e.dst for e in self.edges}


def component_instances(c: Component, k: int) -> list[Instance]:
    out = []
    actions = []
    for e in c.edges:
        if e.action not in actions:
            actions.append(e.action)
    for a in actions:
        insts = action_instances(a, c.edges, k)
        for inst in insts:
            name = a if len(insts) == 1 else f"{a}[{','.join(e.id for e in inst)}]"
            out.append(Instance(name, a, inst))
    return out


# -- witnesses --------------------------------------------------------------------

@dataclass
class CycleWitness:
    kind: str  # "T1" or "T2"
    target: str
    values: dict[str, Fraction]
    component: int | None = None
    segments: int = 0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "component": self.component,
            "segments": self.segments,
            "target": self.target,
            "values": {v: str(x) for v, x in sorted(self.values.items()) if x},
        }


def _target_constraint(sys: LinearSystem, variables: list[str]) -> str:
    """Require the sum of ``variables`` to be at least 1; return the name used."""
    if len(variables) == 1:
        sys.require_at_least(variables[0], 1)
        return variables[0]
    aux = sys.add_variable("target")
    coeffs = {v: Fraction(-1) for v in variables}
    coeffs[aux] = Fraction(1)
    sys.add_equation(coeffs, 0)
    sys.require_at_least(aux, 1)
    return aux


# -- T1 -------------------------------------------------------------------------------

def t1_system(c: Component, k: int) -> tuple[LinearSystem, list[Instance]]:
    insts = component_instances(c, k)
    sys = LinearSystem()
    for inst in insts:
        sys.add_variable(f"y[{inst.name}]")
    for s in c.states:
        coeffs = {}
        for inst in insts:
            eff = instance_effect(inst.edges, c.states)[s]
            if eff:
                coeffs[f"y[{inst.name}]"] = eff
        if coeffs:
            sys.add_equation(coeffs, 0)
    return sys, insts


def _edge_vars_t1(insts: list[Instance], e: Edge) -> list[str]:
    return [f"y[{i.name}]" for i in insts if e in i.edges]


def t1_witness(u: Unwinding, e: UnwindingEdge | str) -> CycleWitness | None:
    if isinstance(e, str):
        e = u.edge(e)
    if e.is_broadcast:
        raise ValueError("T1 is undefined for broadcast edges")
    c = u.components[e.src_comp]
    sys, insts = t1_system(c, u.base.k)
    target = _target_constraint(sys, _edge_vars_t1(insts, e.base))
    sol = lp_feasible(sys)
    if sol is None:
        return None
    return CycleWitness("T1", target, sol, component=c.index)


# -- T2 -------------------------------------------------------------------------------

@dataclass
class SegmentedSystem:
    """The one-lap flow system over the loop components."""

    system: LinearSystem
    loop: list[Component]
    instances: list[list[Instance]]
    broadcasts: list[list[UnwindingEdge]]

    def v(self, j: int, s: str) -> str:
        return f"v{j}[{s}]"

    def w(self, j: int, s: str) -> str:
        return f"w{j}[{s}]"

    def y(self, j: int, inst: Instance) -> str:
        return f"y{j}[{inst.name}]"

    def z(self, j: int, e: UnwindingEdge) -> str:
        return f"z{j}[{e.base.id}]"

    def edge_vars(self, e: UnwindingEdge) -> list[str]:
        if not self.loop or e.src_comp < self.loop[0].index:
            return []
        j = e.src_comp - self.loop[0].index
        if e.is_broadcast:
            return [self.z(j, e)]
        return [self.y(j, i) for i in self.instances[j] if e.base in i.edges]


def t2_system(u: Unwinding) -> SegmentedSystem:
    loop = list(u.loop)
    r = len(loop)
    k = u.base.k
    sys = LinearSystem()
    instances = [component_instances(c, k) for c in loop]
    broadcasts = [u.broadcast_edges(c.index) for c in loop]
    seg = SegmentedSystem(sys, loop, instances, broadcasts)
    for j, c in enumerate(loop):
        for s in c.states:
            sys.add_variable(seg.v(j, s))
        for s in c.states:
            sys.add_variable(seg.w(j, s))
        for inst in instances[j]:
            sys.add_variable(seg.y(j, inst))
        for e in broadcasts[j]:
            sys.add_variable(seg.z(j, e))
    for j, c in enumerate(loop):
        effects = [(seg.y(j, i), instance_effect(i.edges, c.states)) for i in instances[j]]
        for s in c.states:
            # (1) w = v + sum y * a#
            coeffs = {seg.w(j, s): 1, seg.v(j, s): -1}
            for name, eff in effects:
                if eff[s]:
                    coeffs[name] = -eff[s]
            sys.add_equation(coeffs, 0)
            # (2) every process takes a broadcast edge
            coeffs = {seg.w(j, s): -1}
            for e in broadcasts[j]:
                if e.base.src == s:
                    coeffs[seg.z(j, e)] = 1
            sys.add_equation(coeffs, 0)
        # (3) the flow arrives as the next segment's start
        nxt = loop[(j + 1) % r]
        for t in nxt.states:
            coeffs = {seg.v((j + 1) % r, t): 1}
            for e in broadcasts[j]:
                if e.base.dst == t:
                    coeffs[seg.z(j, e)] = coeffs.get(seg.z(j, e), 0) - 1
            sys.add_equation(coeffs, 0)
    return seg


def _fireable(seg: SegmentedSystem, support: frozenset[str]) -> set[str]:
    """Instance variables in ``support`` that pass both activation fixpoints."""
    ok: set[str] = set()
    for j, c in enumerate(seg.loop):
        used = [i for i in seg.instances[j] if seg.y(j, i) in support]
        fwd = _activate({s for s in c.states if seg.v(j, s) in support}, used, reverse=False)
        bwd = _activate({s for s in c.states if seg.w(j, s) in support}, used, reverse=True)
        ok |= {seg.y(j, i) for i in fwd & bwd}
    return ok


def _activate(active: set[str], used: list[Instance], reverse: bool) -> set[Instance]:
    active = set(active)
    fired: set[Instance] = set()
    changed = True
    while changed:
        changed = False
        for inst in used:
            if inst in fired:
                continue
            need, give = (inst.targets(), inst.sources()) if reverse else (inst.sources(), inst.targets())
            if need <= active:
                fired.add(inst)
                active |= give
                changed = True
    return fired


@dataclass
class PruneResult:
    system: LinearSystem
    solution: dict[str, Fraction] | None
    support: frozenset[str]
    pinned: list[str] = field(default_factory=list)
    rounds: int = 0


def prune_support(seg: SegmentedSystem, sys: LinearSystem | None = None) -> PruneResult:
    """Pin unfireable actions to zero until the maximal support is self-consistent.

    ``sys`` defaults to the homogeneous cone of ``seg``; a copy with a target
    constraint may be passed instead.  For targets the max-support step runs on
    the homogeneous part and the target is checked afterwards, which yields the
    same fixpoint because supports are closed under addition.
    """
    sys = (sys or seg.system).copy()
    pinned: list[str] = []
    rounds = 0
    all_y = {seg.y(j, i) for j in range(len(seg.loop)) for i in seg.instances[j]}
    while True:
        rounds += 1
        res = _max_support(sys)
        if res is None:
            return PruneResult(sys, None, frozenset(), pinned, rounds)
        sol, support = res
        bad = sorted((support & all_y) - _fireable(seg, support), key=sys.variables.index)
        if not bad:
            return PruneResult(sys, sol, support, pinned, rounds)
        for v in bad:
            sys.pin_zero(v)
            pinned.append(v)


def _max_support(sys: LinearSystem):
    if sys.homogeneous and not sys.lower:
        return max_support_solution(sys)
    # targeted system: find any point, then extend its support through the cone
    point = lp_feasible(sys)
    if point is None:
        return None
    cone = LinearSystem(list(sys.variables), list(sys.equations), {}, set(sys.fixed_zero))
    res = max_support_solution(cone)
    total = dict(point)
    if res is not None:
        for v, x in res[0].items():
            total[v] += x
    check_solution(sys, total)
    return total, frozenset(v for v, x in total.items() if x > 0)


def t2_witness(u: Unwinding, e: UnwindingEdge | str) -> CycleWitness | None:
    if isinstance(e, str):
        e = u.edge(e)
    if e.src_comp < u.prefix or not u.loop:
        return None
    seg = t2_system(u)
    sys = seg.system.copy()
    names = seg.edge_vars(e)
    if not names:
        return None
    target = _target_constraint(sys, names)
    res = prune_support(seg, sys)
    if res.solution is None:
        return None
    return CycleWitness("T2", target, res.solution, segments=len(seg.loop))


# -- classification ---------------------------------------------------------------

@dataclass
class EdgeReport:
    color: Color
    t1: bool
    t2: bool
    witness: dict | None = None

    def to_json(self) -> dict:
        return {"color": self.color.value, "t1": self.t1, "t2": self.t2, "witness": self.witness}


@dataclass
class Classification:
    unwinding: Unwinding
    edges: dict[str, EdgeReport]

    def colors(self) -> dict[str, str]:
        return {k: v.color.value for k, v in self.edges.items()}

    def color(self, edge_id: str) -> Color:
        return self.edges[edge_id].color

    def to_json(self) -> dict:
        return {k: v.to_json() for k, v in self.edges.items()}

    def to_dot(self) -> str:
        return self.unwinding.to_dot(self.colors())


def t1_support(u: Unwinding) -> set[Edge]:
    """Annotated rendezvous edges lying on some broadcast-free pseudo-cycle."""
    out: set[Edge] = set()
    for c in u.components:
        if not c.edges:
            continue
        sys, insts = t1_system(c, u.base.k)
        res = max_support_solution(sys)
        if res is None:
            continue
        for inst in insts:
            if f"y[{inst.name}]" in res[1]:
                out |= {Edge(annotate(x.src, c.index), x.action, x.index, annotate(x.dst, c.index))
                        for x in inst.edges}
    return out


def t2_support(u: Unwinding) -> set[str]:
    """Ids of unwinding edges lying on a one-lap pseudo-cycle with broadcasts."""
    if not u.loop or not any(c.states for c in u.loop):
        return set()
    seg = t2_system(u)
    res = prune_support(seg)
    if res.solution is None:
        return set()
    return {e.id for e in u.edges if e.src_comp >= u.prefix
            and any(v in res.support for v in seg.edge_vars(e))}


def _witness_pair(args) -> tuple[str, dict | None]:
    u, edge_id, t1, t2 = args
    out = {}
    if t1:
        w = t1_witness(u, edge_id)
        out["t1"] = w.to_json() if w else None
    if t2:
        w = t2_witness(u, edge_id)
        out["t2"] = w.to_json() if w else None
    return edge_id, (out or None)


def classify(u: Unwinding, witnesses: bool = False, edges: Iterable[str] | None = None,
             jobs: int = 1) -> Classification:
    """Colour every unwinding edge (or those listed in ``edges``).

    Colours come from the maximal supports of the T1 cones and of the pruned
    T2 cone, one LP family per template rather than per edge.  With
    ``witnesses`` the per-edge targeted LPs are solved as well and reported.
    """
    wanted = [u.edge(x) for x in edges] if edges is not None else list(u.edges)
    t1s = t1_support(u)
    t2s = t2_support(u)
    reports: dict[str, EdgeReport] = {}
    for e in wanted:
        t1 = (not e.is_broadcast) and e.annotated in t1s
        t2 = e.id in t2s
        reports[e.id] = EdgeReport(color_of(t1, t2), t1, t2)
    if witnesses:
        tasks = [(u, e.id, r.t1, r.t2) for e, r in zip(wanted, reports.values())]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_witness_pair, tasks))
        else:
            results = [_witness_pair(t) for t in tasks]
        for edge_id, w in results:
            reports[edge_id].witness = w
    return Classification(u, reports)


# -- realisation ----------------------------------------------------------------------

@dataclass
class Realized:
    ok: bool
    n: int = 0
    path: list[GlobalTransition] = field(default_factory=list)
    scale: int = 1
    diagnostics: str = ""


def _count_instance_index(cs: CountSystem) -> dict[tuple[Edge, ...], int]:
    return {inst: i for i, inst in enumerate(cs.instances)}


def _annotated(inst: Instance, comp_index: int) -> tuple[Edge, ...]:
    return tuple(Edge(annotate(e.src, comp_index), e.action, e.index, annotate(e.dst, comp_index))
                 for e in inst.edges)


def realize_witness(w: CycleWitness, u: Unwinding, scale_cap: int = 64) -> Realized:
    cs = CountSystem(u.template)
    if w.kind == "T1":
        return _realize_t1(w, u, cs)
    return _realize_t2(w, u, cs, scale_cap)


def _realize_t1(w: CycleWitness, u: Unwinding, cs: CountSystem) -> Realized:
    c = u.components[w.component]
    insts = component_instances(c, u.base.k)
    ints = integer_scale({f"y[{i.name}]": w.values.get(f"y[{i.name}]", Fraction(0)) for i in insts})
    index = _count_instance_index(cs)
    load = [0] * len(cs.order)
    descs = []
    for inst in insts:
        mult = ints[f"y[{inst.name}]"]
        if not mult:
            continue
        ann = _annotated(inst, c.index)
        for e in ann:
            load[cs.index[e.src]] += mult
        descs += [("r", index[ann], None)] * mult
    if not descs:
        return Realized(False, diagnostics="empty witness")
    f0 = cs.start_config(load)
    path = cs.materialise(f0, descs)
    ok = is_path(u.template, path) and is_pseudo_cycle(path)
    return Realized(ok, len(f0), path, 1, "" if ok else "replay failed")


def _realize_t2(w: CycleWitness, u: Unwinding, cs: CountSystem, scale_cap: int) -> Realized:
    seg = t2_system(u)
    base = integer_scale({v: w.values.get(v, Fraction(0)) for v in seg.system.variables})
    index = _count_instance_index(cs)
    scale = 1
    last = ""
    while scale <= scale_cap:
        vals = {v: x * scale for v, x in base.items()}
        out = _schedule_t2(seg, vals, cs, index)
        if isinstance(out, list):
            f0 = cs.start_config(_vector(seg, vals, cs, 0))
            path = cs.materialise(f0, out)
            ok = is_path(u.template, path) and is_pseudo_cycle(path)
            return Realized(ok, len(f0), path, scale, "" if ok else "replay failed")
        last = out
        scale *= 2
    return Realized(False, scale=scale // 2, diagnostics=f"greedy scheduling stalled: {last}")


def _vector(seg: SegmentedSystem, vals, cs: CountSystem, j: int) -> list[int]:
    c = seg.loop[j]
    vec = [0] * len(cs.order)
    for s in c.states:
        vec[cs.index[annotate(s, c.index)]] = vals[seg.v(j, s)]
    return vec


def _schedule_t2(seg: SegmentedSystem, vals, cs: CountSystem, index):
    cur = _vector(seg, vals, cs, 0)
    if not any(cur):
        return "no processes at the start of the lap"
    descs = []
    r = len(seg.loop)
    for j, c in enumerate(seg.loop):
        todo = [(inst, vals[seg.y(j, inst)]) for inst in seg.instances[j]]
        todo = [[inst, m] for inst, m in todo if m]
        while todo:
            for item in todo:
                ann = _annotated(item[0], c.index)
                i = index[ann]
                if all(x >= y for x, y in zip(cur, cs.needs[i])):
                    cur = [x + y for x, y in zip(cur, cs.effects[i])]
                    descs.append(("r", i, None))
                    item[1] -= 1
                    break
            else:
                return f"segment {j}: no remaining action is enabled"
            todo = [it for it in todo if it[1]]
        parts = []
        for e in seg.broadcasts[j]:
            m = vals[seg.z(j, e)]
            if m:
                ann = e.annotated
                parts.append((ann, m))
                cur[cs.index[ann.src]] -= m
                cur[cs.index[ann.dst]] += m
        if any(x < 0 for x in cur):
            return f"segment {j}: broadcast flow exceeds the processes present"
        descs.append(("b", tuple(parts), None))
    if cur != _vector(seg, vals, cs, 0):
        return "lap does not return to its start counts"
    return descs
