"""Counter representations, action effects and an exact rational LP feasibility solver.

Everything here is exact: values are ``fractions.Fraction`` and the solver is
a phase-one simplex with Bland's rule, so feasibility answers never depend
on floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import Configuration, Edge, GlobalTransition

Vector = dict  # state -> Fraction / int


class SolverError(AssertionError):
    """A returned LP solution failed its exact re-substitution check."""


def counter_rep(f: Configuration, states: Sequence[str]) -> dict[str, int]:
    counts = f.counts(states)
    if sum(counts) != len(f):
        raise ValueError("configuration uses states outside the given ordering")
    return dict(zip(states, counts))


def action_instances(action: str, edges: Iterable[Edge], k: int) -> list[tuple[Edge, ...]]:
    """Every way of picking one edge per letter ``action.1 .. action.k``."""
    by_letter: list[list[Edge]] = [[] for _ in range(k)]
    for e in edges:
        if e.action == action and 1 <= e.index <= k:
            by_letter[e.index - 1].append(e)
    if not all(by_letter):
        return []
    return [tuple(c) for c in itertools.product(*by_letter)]


def instance_effect(instance: Sequence[Edge], states: Sequence[str]) -> dict[str, int]:
    eff = {s: 0 for s in states}
    for e in instance:
        eff[e.dst] += 1
        eff[e.src] -= 1
    return eff


def action_effect(action: str, component, k: int | None = None) -> dict[str, int]:
    """Displacement vector of ``action`` inside ``component``.

    ``component`` is anything with ``states`` and ``edges`` (a template or an
    unwinding component).  Every letter must label exactly one edge there.
    """
    k = k if k is not None else getattr(component, "k")
    insts = action_instances(action, component.edges, k)
    if not insts:
        raise ValueError(f"action {action} is not fully present in the component")
    if len(insts) > 1:
        raise ValueError(f"action {action} has several edges for one letter; use action_instances")
    return instance_effect(insts[0], component.states)


@dataclass(frozen=True)
class RationalPath:
    origin: tuple[Fraction, ...]
    steps: tuple[tuple[Fraction, ...], ...]

    def prefix_sums(self) -> list[tuple[Fraction, ...]]:
        cur = tuple(Fraction(x) for x in self.origin)
        out = [cur]
        for d in self.steps:
            if len(d) != len(cur):
                raise ValueError("dimension mismatch")
            cur = tuple(a + b for a, b in zip(cur, d))
            out.append(cur)
        return out

    @property
    def end(self) -> tuple[Fraction, ...]:
        return self.prefix_sums()[-1]


def is_legal(p: RationalPath) -> bool:
    return all(x >= 0 for point in p.prefix_sums() for x in point)


def counter_path(path: Sequence[GlobalTransition], states: Sequence[str]) -> RationalPath:
    if not path:
        raise ValueError("empty path")
    origin = tuple(Fraction(c) for c in path[0].src.counts(states))
    steps = []
    for step in path:
        a, b = step.src.counts(states), step.dst.counts(states)
        steps.append(tuple(Fraction(y - x) for x, y in zip(a, b)))
    return RationalPath(origin, tuple(steps))


# -- linear systems -------------------------------------------------------------

@dataclass
class LinearSystem:
    """Equalities over nonnegative variables with optional lower bounds.

    ``lower[v] = c`` means ``v >= c``; ``fixed_zero`` variables are pinned to 0.
    """

    variables: list[str] = field(default_factory=list)
    equations: list[tuple[dict[str, Fraction], Fraction]] = field(default_factory=list)
    lower: dict[str, Fraction] = field(default_factory=dict)
    fixed_zero: set[str] = field(default_factory=set)

    def add_variable(self, name: str) -> str:
        if name in self._index():
            raise ValueError(f"duplicate variable {name}")
        self.variables.append(name)
        self.__dict__.pop("_idx", None)
        return name

    def _index(self) -> dict[str, int]:
        idx = self.__dict__.get("_idx")
        if idx is None or len(idx) != len(self.variables):
            idx = {v: i for i, v in enumerate(self.variables)}
            self.__dict__["_idx"] = idx
        return idx

    def add_equation(self, coeffs: Mapping[str, object], const: object = 0) -> None:
        idx = self._index()
        clean = {}
        for v, c in coeffs.items():
            if v not in idx:
                raise KeyError(f"unknown variable {v}")
            c = Fraction(c)
            if c:
                clean[v] = clean.get(v, Fraction(0)) + c
        self.equations.append(({v: c for v, c in clean.items() if c}, Fraction(const)))

    def require_at_least(self, var: str, bound: object = 1) -> None:
        if var not in self._index():
            raise KeyError(f"unknown variable {var}")
        self.lower[var] = max(self.lower.get(var, Fraction(0)), Fraction(bound))

    def pin_zero(self, var: str) -> None:
        if var not in self._index():
            raise KeyError(f"unknown variable {var}")
        self.fixed_zero.add(var)

    def copy(self) -> "LinearSystem":
        return LinearSystem(
            list(self.variables),
            [(dict(c), k) for c, k in self.equations],
            dict(self.lower),
            set(self.fixed_zero),
        )

    @property
    def homogeneous(self) -> bool:
        return all(k == 0 for _, k in self.equations)

    def residuals(self, sol: Mapping[str, Fraction]) -> list[Fraction]:
        return [sum((c * sol.get(v, 0) for v, c in coeffs.items()), Fraction(0)) - k
                for coeffs, k in self.equations]

    def satisfied_by(self, sol: Mapping[str, object]) -> bool:
        for v in self.variables:
            x = Fraction(sol.get(v, 0))
            if x < self.lower.get(v, 0) or x < 0:
                return False
            if v in self.fixed_zero and x != 0:
                return False
        return all(r == 0 for r in self.residuals({v: Fraction(x) for v, x in sol.items()}))

    def dump(self) -> str:
        """LP-like text rendering for debugging."""
        lines = [f"vars {' '.join(self.variables)}"]
        for coeffs, k in self.equations:
            terms = " ".join(f"{'+' if c > 0 else '-'} {abs(c)} {v}" for v, c in coeffs.items()) or "0"
            lines.append(f"  {terms} = {k}")
        for v, b in self.lower.items():
            lines.append(f"  {v} >= {b}")
        for v in sorted(self.fixed_zero):
            lines.append(f"  {v} = 0")
        lines.append("  all >= 0")
        return "\n".join(lines)


# every solver answer goes through check_solution; these tallies make that auditable
SOLUTION_CHECKS = {"passed": 0, "failed": 0}


def check_solution(sys: LinearSystem, sol: Mapping[str, Fraction]) -> None:
    if not sys.satisfied_by(sol):
        SOLUTION_CHECKS["failed"] += 1
        raise SolverError(f"solution does not satisfy the system exactly: {sol}")
    SOLUTION_CHECKS["passed"] += 1


def lp_feasible(sys: LinearSystem) -> dict[str, Fraction] | None:
    """Return an exact feasible point of ``sys`` or ``None``."""
    for v in sys.fixed_zero:
        if sys.lower.get(v, 0) > 0:
            return None
    cols = [v for v in sys.variables if v not in sys.fixed_zero]
    col_of = {v: j for j, v in enumerate(cols)}
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for coeffs, const in sys.equations:
        row = [Fraction(0)] * len(cols)
        b = Fraction(const)
        for v, c in coeffs.items():
            b -= c * sys.lower.get(v, 0)
            if v in col_of:
                row[col_of[v]] += c
        if b < 0:
            row = [-x for x in row]
            b = -b
        rows.append(row)
        rhs.append(b)
    shifted = _phase_one(rows, rhs, len(cols))
    if shifted is None:
        return None
    sol = {v: Fraction(0) for v in sys.variables}
    for v in sys.variables:
        sol[v] = sys.lower.get(v, Fraction(0))
    for j, v in enumerate(cols):
        sol[v] += shifted[j]
    check_solution(sys, sol)
    return sol


def _phase_one(rows: list[list[Fraction]], rhs: list[Fraction], n: int) -> list[Fraction] | None:
    """Find x >= 0 with rows @ x = rhs (rhs >= 0) by minimising artificial slack."""
    m = len(rows)
    if m == 0:
        return [Fraction(0)] * n
    zero = Fraction(0)
    width = n + m
    tab = [row + [Fraction(1) if i == r else zero for i in range(m)] + [rhs[r]]
           for r, row in enumerate(rows)]
    basis = [n + r for r in range(m)]
    # reduced costs of the phase-one objective (sum of artificials)
    cost = [zero] * (width + 1)
    for r in range(m):
        for j in range(n):
            cost[j] -= tab[r][j]
        cost[width] -= tab[r][width]
    while True:
        enter = next((j for j in range(width) if cost[j] < 0), None)
        if enter is None:
            break
        leave = None
        best = None
        for r in range(m):
            a = tab[r][enter]
            if a > 0:
                ratio = tab[r][width] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:  # unbounded direction cannot occur for a bounded-below objective
            raise SolverError("phase one became unbounded")
        _pivot(tab, cost, leave, enter)
        basis[leave] = enter
    if cost[width] != 0:
        return None
    x = [zero] * n
    for r, b in enumerate(basis):
        if b < n:
            x[b] = tab[r][width]
    return x


def _pivot(tab: list[list[Fraction]], cost: list[Fraction], r: int, c: int) -> None:
    prow = tab[r]
    piv = prow[c]
    if piv != 1:
        prow[:] = [x / piv for x in prow]
    nz = [j for j, x in enumerate(prow) if x]
    for other in itertools.chain(tab, (cost,)):
        if other is prow:
            continue
        f = other[c]
        if f:
            for j in nz:
                other[j] -= f * prow[j]


def max_support_solution(sys: LinearSystem) -> tuple[dict[str, Fraction], frozenset[str]] | None:
    """A solution whose support is the union of supports of all solutions.

    Requires equations with zero right-hand side, so that sums of solutions
    are solutions again.
    """
    if not sys.homogeneous:
        raise ValueError("max_support_solution needs a homogeneous system")
    sol = lp_feasible(sys)
    if sol is None:
        return None
    total = dict(sol)
    support = {v for v, x in total.items() if x > 0}
    while True:
        remaining = [v for v in sys.variables if v not in support and v not in sys.fixed_zero]
        if not remaining:
            break
        probe = sys.copy()
        aux = "__support_probe"
        while aux in probe._index():
            aux += "_"
        probe.add_variable(aux)
        coeffs = {v: Fraction(-1) for v in remaining}
        coeffs[aux] = Fraction(1)
        probe.add_equation(coeffs, 0)
        probe.require_at_least(aux, 1)
        extra = lp_feasible(probe)
        if extra is None:
            break
        for v in sys.variables:
            total[v] += extra[v]
        support |= {v for v in sys.variables if extra[v] > 0}
    check_solution(sys, total)
    return total, frozenset(support)


def integer_scale(sol: Mapping[str, Fraction]) -> dict[str, int]:
    """Multiply by the lcm of the denominators."""
    lcm = 1
    for x in sol.values():
        lcm = math.lcm(lcm, Fraction(x).denominator)
    return {v: int(Fraction(x) * lcm) for v, x in sol.items()}
