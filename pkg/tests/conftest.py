import random
from fractions import Fraction as F

import pytest
from hypothesis import HealthCheck, settings

from rbcheck.fixtures import load_template
from rbcheck.model import Configuration, Edge, make_rendezvous
from rbcheck.ratvas import SOLUTION_CHECKS, LinearSystem
from rbcheck.unwinding import build_unwinding

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def E(src, letter, dst):
    if letter == "b":
        return Edge.broadcast(src, dst)
    action, index = letter.split(".")
    return Edge(src, action, int(index), dst)


def fig1_example_path():
    """The 4-process pseudo-cycle (p,q,q,r) -> (p,q,r,p) -> (p,r,p,p) -> (p,r,q,q)."""
    f0 = Configuration.of(["p", "q", "q", "r"])
    s1 = make_rendezvous(f0, [(3, E("q", "c.1", "r")), (4, E("r", "c.2", "p"))])
    s2 = make_rendezvous(s1.dst, [(2, E("q", "c.1", "r")), (3, E("r", "c.2", "p"))])
    s3 = make_rendezvous(s2.dst, [(3, E("p", "a.1", "q")), (4, E("p", "a.2", "q"))])
    return [s1, s2, s3]


@pytest.fixture
def fig1():
    return load_template("fig1")


@pytest.fixture
def fig2():
    return load_template("fig2")


@pytest.fixture
def fig2_u(fig2):
    return build_unwinding(fig2)


def planted_system(rng: random.Random, nvars: int, neqs: int, homogeneous: bool = False):
    """Random equalities with a known nonnegative rational solution."""
    sys = LinearSystem()
    names = [sys.add_variable(f"x{i}") for i in range(nvars)]
    point = {v: (F(0) if rng.random() < 0.3 else F(rng.randint(1, 9), rng.randint(1, 4))) for v in names}
    for _ in range(neqs):
        coeffs = {v: rng.randint(-4, 4) for v in names if rng.random() < 0.7}
        const = sum((c * point[v] for v, c in coeffs.items()), F(0))
        if homogeneous and const != 0:
            # fix the constant by adjusting the first positive-valued variable's coefficient
            pos = [v for v in names if point[v] > 0]
            if not pos:
                continue
            v = rng.choice(pos)
            coeffs[v] = coeffs.get(v, 0) - const / point[v]
            const = F(0)
        sys.add_equation(coeffs, const)
    for v in names:
        if point[v] >= 1 and rng.random() < 0.4:
            sys.require_at_least(v, 1)
        if point[v] == 0 and rng.random() < 0.2:
            sys.pin_zero(v)
    assert sys.satisfied_by(point)
    return sys, point


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"exact LP re-substitution checks: {SOLUTION_CHECKS['passed']} passed, {SOLUTION_CHECKS['failed']} failed")
