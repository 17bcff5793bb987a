import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rbcheck.classify import (
    Color,
    CycleWitness,
    classify,
    color_of,
    prune_support,
    realize_witness,
    t1_support,
    t1_system,
    t1_witness,
    t2_system,
    t2_witness,
)
from rbcheck.fixtures import TEMPLATES, load_template, random_template
from rbcheck.model import is_path, is_pseudo_cycle, parse_template
from rbcheck.oracle import SearchBudget, oracle_edge_kinds
from rbcheck.unwinding import build_unwinding

# s0 is only entered from s1, and the process that enters it can never return
# to s1, so the zero-effect action at s0 has no supply in any one-lap cycle.
STARVED = """\
system rb
k 2
state s0
state s1 init
state s2
edge s0 a0.1 s0
edge s0 a0.2 s0
edge s0 b s2
edge s1 b s1
edge s1 b s0
edge s2 b s2
"""

CHAIN = """\
system rb
k 2
state s1 init
state s2
state s3
edge s1 f.1 s2
edge s1 f.2 s2
edge s2 g.1 s3
edge s2 g.2 s3
edge s3 b s1
edge s2 b s1
edge s1 b s1
"""


def unwind(name):
    return build_unwinding(load_template(name))


def test_color_truth_table():
    assert color_of(True, True) is Color.GREEN
    assert color_of(True, False) is Color.BLUE
    assert color_of(False, True) is Color.ORANGE
    assert color_of(False, False) is Color.RED


def test_fig2_all_orange(fig2_u):
    cls = classify(fig2_u)
    assert sorted(cls.colors().values()) == ["orange"] * 4


def test_fig1_c1_witness_ratio():
    u = unwind("fig1")
    w = t1_witness(u, "q:c.1:r@comp0")
    assert w is not None and w.kind == "T1"
    assert w.values["y[c]"] == 2 * w.values["y[a]"] > 0


def test_fig2_a1_has_no_t1(fig2_u):
    assert t1_witness(fig2_u, "p:a.1:p@comp0") is None


def test_self_loop_action_t1_trivial():
    w = t1_witness(unwind("all_green"), "p:g.1:p@comp0")
    assert w is not None and w.values["y[g]"] >= 1


def test_t1_on_broadcast_is_an_error(fig2_u):
    with pytest.raises(ValueError):
        t1_witness(fig2_u, "q:b:p@comp0")


def test_fig2_t2_witness_shape(fig2_u):
    w = t2_witness(fig2_u, "p:a.1:p@comp0")
    assert w is not None and w.segments == 1
    vals = w.values
    assert vals["v0[p]"] > 0 and vals["v0[q]"] == 0
    assert vals["y0[a]"] >= 1
    assert vals["z0[p:b:p]"] > 0 and vals["z0[q:b:p]"] > 0
    # w = v + y * (p:-1, q:+1)
    assert vals["w0[p]"] == vals["v0[p]"] - vals["y0[a]"]
    assert vals["w0[q]"] == vals["y0[a]"]


def test_fig2_t2_broadcast_target(fig2_u):
    w = t2_witness(fig2_u, "q:b:p@comp0")
    assert w is not None and w.values["z0[q:b:p]"] >= 1


def test_loop_without_return_has_no_t2():
    # dead_end: the z component is a sink loop; the x edges live in the prefix
    u = unwind("dead_end")
    assert t2_witness(u, "p:x.1:d@comp0") is None
    assert t2_witness(u, "z:b:z@comp1") is not None


def test_fig2_needs_no_pruning(fig2_u):
    res = prune_support(t2_system(fig2_u))
    assert res.solution is not None and res.pinned == [] and res.rounds == 1


def test_chained_supply_is_not_pruned():
    u = build_unwinding(parse_template(CHAIN))
    res = prune_support(t2_system(u))
    assert res.pinned == []
    assert {"y0[f]", "y0[g]"} <= res.support


def test_zero_supply_is_pruned():
    u = build_unwinding(parse_template(STARVED))
    seg = t2_system(u)
    res = prune_support(seg)
    assert res.pinned == [seg.y(0, seg.instances[0][0])]
    eid = next(e.id for e in u.edges if e.base.action == "a0" and e.src_comp == u.prefix)
    assert t2_witness(u, eid) is None
    assert classify(u).color(eid) is Color.BLUE


@pytest.mark.parametrize("name,expected", [
    ("all_green", {"p:g.1:p@comp0": "green", "p:g.2:p@comp0": "green", "p:b:p@comp0": "orange"}),
    ("dead_end", {"p:x.1:d@comp0": "red", "p:x.2:d@comp0": "red", "p:b:z@comp0": "red",
                  "d:b:z@comp0": "red", "z:b:z@comp1": "orange"}),
    ("fig1", {"p:a.1:q@comp0": "blue", "p:a.2:q@comp0": "blue",
              "q:c.1:r@comp0": "blue", "r:c.2:p@comp0": "blue"}),
    ("all_red", {"p:x.1:d@comp0": "red", "p:x.2:d@comp0": "red"}),
])
def test_fixture_colors(name, expected):
    assert classify(unwind(name)).colors() == expected


def _check_witness(u, e, w):
    if w.kind == "T1":
        sys, _ = t1_system(u.components[w.component], u.base.k)
        ys = [v for v in w.values if v.startswith("y[") and e.base in _inst_edges(u, w.component, v)]
        assert sum(w.values[v] for v in ys) >= 1
    else:
        sys = t2_system(u).system
        seg = t2_system(u)
        assert sum(w.values.get(v, 0) for v in seg.edge_vars(e)) >= 1
    assert sys.satisfied_by({k: v for k, v in w.values.items() if k != "target"})


def _inst_edges(u, comp_index, var):
    from rbcheck.classify import component_instances

    name = var[2:-1]
    for inst in component_instances(u.components[comp_index], u.base.k):
        if inst.name == name:
            return inst.edges
    return ()


def _agreement(u):
    cls = classify(u)
    for e in u.edges:
        rep = cls.edges[e.id]
        w1 = None if e.is_broadcast else t1_witness(u, e)
        w2 = t2_witness(u, e)
        assert (w1 is not None) == rep.t1, e.id
        assert (w2 is not None) == rep.t2, e.id
        for w in (w1, w2):
            if w is not None:
                _check_witness(u, e, w)


@pytest.mark.parametrize("name", TEMPLATES)
def test_per_edge_witnesses_agree_with_fast_path(name):
    _agreement(unwind(name))


@settings(max_examples=60)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_per_edge_agreement_random(seed, letter_edges):
    t = random_template(random.Random(seed), max_states=5, max_letter_edges=letter_edges)
    _agreement(build_unwinding(t))


@settings(max_examples=80)
@given(st.integers(0, 10**6))
def test_color_sanity(seed):
    u = build_unwinding(random_template(random.Random(seed), max_states=6, max_letter_edges=2))
    cls = classify(u)
    assert set(cls.edges) == {e.id for e in u.edges}
    for e in u.edges:
        c = cls.color(e.id)
        if e.is_broadcast:
            assert c not in (Color.BLUE, Color.GREEN)
        if e.src_comp < u.prefix:
            assert c not in (Color.GREEN, Color.ORANGE)


def _inject(u, e):
    """Add a T1 witness of ``e`` into a T2 witness and re-check the T2 system."""
    w1, w2 = t1_witness(u, e), t2_witness(u, e)
    if w1 is None or w2 is None:
        return False
    seg = t2_system(u)
    j = e.src_comp - u.prefix
    point = {k: v for k, v in w2.values.items() if k != "target"}
    for inst in seg.instances[j]:
        point[seg.y(j, inst)] = point.get(seg.y(j, inst), 0) + w1.values.get(f"y[{inst.name}]", 0)
    assert seg.system.satisfied_by(point)
    return True


def test_injection_on_green_fixtures():
    hits = 0
    for name in TEMPLATES:
        u = unwind(name)
        for e in u.edges:
            if not e.is_broadcast and classify(u, edges=[e.id]).color(e.id) is Color.GREEN:
                hits += _inject(u, e)
    assert hits >= 6


@settings(max_examples=60)
@given(st.integers(0, 10**6))
def test_injection_property(seed):
    u = build_unwinding(random_template(random.Random(seed), max_states=5, max_letter_edges=2))
    for e in u.edges:
        if not e.is_broadcast:
            _inject(u, e)


@pytest.mark.parametrize("name", TEMPLATES)
def test_fixture_witnesses_realize(name):
    u = unwind(name)
    cls = classify(u, witnesses=True)
    for e in u.edges:
        for kind, w in ((k, f(u, e)) for k, f in (("t1", t1_witness), ("t2", t2_witness))
                        if not (k == "t1" and e.is_broadcast)):
            if w is None:
                continue
            assert cls.edges[e.id].witness[kind] is not None
            rz = realize_witness(w, u)
            assert rz.ok, (e.id, kind, rz.diagnostics)
            assert is_path(u.template, rz.path) and is_pseudo_cycle(rz.path)
            assert any(m == e.annotated for step in rz.path for _, m in step.moves), (e.id, kind)
            if kind == "t2":
                assert sum(step.is_broadcast for step in rz.path) == u.period


def test_fig1_realization_matches_example_size():
    u = unwind("fig1")
    rz = realize_witness(t1_witness(u, "q:c.1:r@comp0"), u)
    assert rz.ok and len(rz.path) % 3 == 0
    assert sum(step.action == "c" for step in rz.path) == 2 * sum(step.action == "a" for step in rz.path)


def test_fig2_t2_realization_is_two_process_cycle(fig2_u):
    # the minimal point v=(p:2, q:0), y_a=1, both broadcast flows 1
    vals = {"v0[p]": 2, "w0[p]": 1, "w0[q]": 1, "y0[a]": 1, "z0[p:b:p]": 1, "z0[q:b:p]": 1}
    w = CycleWitness("T2", "y0[a]", {k: Fraction(v) for k, v in vals.items()}, segments=1)
    assert t2_system(fig2_u).system.satisfied_by(w.values)
    rz = realize_witness(w, fig2_u)
    assert rz.ok and rz.n == 2
    assert [s.is_broadcast for s in rz.path] == [False, True]
    # the solver's own point has the same shape, possibly scaled up
    rz = realize_witness(t2_witness(fig2_u, "p:a.1:p@comp0"), fig2_u)
    assert rz.ok and rz.path[-1].is_broadcast
    assert sum(s.is_broadcast for s in rz.path) == 1


def test_self_loop_realization_single_step():
    u = unwind("all_green")
    rz = realize_witness(t1_witness(u, "p:g.1:p@comp0"), u)
    assert rz.ok and rz.n == 2 and len(rz.path) == 1


@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_no_false_negatives_against_oracle(seed):
    u = build_unwinding(random_template(random.Random(seed), max_states=4, max_letter_edges=2))
    cls = classify(u)
    found = oracle_edge_kinds(u, SearchBudget(max_n=3, max_states=20_000, max_millis=20_000))
    for e in u.edges:
        if found[e.id].broadcast_free is not None:
            assert cls.edges[e.id].t1, e.id
        if found[e.id].with_broadcast is not None:
            assert cls.edges[e.id].t2, e.id


def test_classification_json_schema():
    jsonschema = pytest.importorskip("jsonschema")
    import json
    from pathlib import Path

    schema = json.loads((Path(__file__).parent.parent / "schemas" / "classification.schema.json").read_text())
    for name in TEMPLATES:
        u = unwind(name)
        report = {"n": u.n, "r": u.period, "edges": classify(u, witnesses=True).to_json()}
        jsonschema.validate(report, schema)


def test_witness_json_values_are_exact_strings(fig2_u):
    data = t2_witness(fig2_u, "p:a.1:p@comp0").to_json()
    assert all(Fraction(v) > 0 for v in data["values"].values())


def test_parallel_witnesses_match_serial(fig2_u):
    a = classify(fig2_u, witnesses=True).to_json()
    b = classify(fig2_u, witnesses=True, jobs=2).to_json()
    assert a == b


def test_dot_export_colors(fig2_u):
    dot = classify(fig2_u).to_dot()
    assert dot.count("orange") >= 4


def test_t1_support_is_annotated(fig2_u):
    assert t1_support(fig2_u) == set()
