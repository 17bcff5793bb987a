import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from rbcheck.automata import (
    INC,
    NOOP,
    RESET,
    BoundedCounterAutomaton,
    Lasso,
    Matcher,
    Pattern,
    SpecAutomaton,
    SpecError,
    Transition,
    UnsupportedFeature,
    accepts_lasso,
    build_ainf,
    check_lasso,
    check_liveness,
    check_safety,
    emptiness,
    intersect,
    lasso_spec,
    parse_spec,
    sample_lassos,
    validate_spec,
)
from rbcheck.classify import classify
from rbcheck.fixtures import TEMPLATES, load_spec, load_template, random_template
from rbcheck.model import Edge, ParseError, parse_template
from rbcheck.oracle import SearchBudget, realize_lasso
from rbcheck.unwinding import build_unwinding

from conftest import E

ACCEPT_ALL = parse_spec("spec nbw\nstate s init accepting\ntrans s * s\n")
EMPTY = parse_spec("spec nbw\nstate s init\nstate t accepting\ntrans s * s\n")
SCHEMAS = Path(__file__).parent.parent / "schemas"


def ainf(name):
    u = build_unwinding(load_template(name))
    return build_ainf(u, classify(u).colors())


# -- spec parsing -----------------------------------------------------------------------

def test_parse_fixture_specs():
    s = load_spec("infa1_infb")
    assert s.kind == "nbw" and s.initial == {"w0"} and s.accepting == {"w2"}
    assert ("w0", Pattern(None, "a.1", None), "w1") in s.transitions
    assert ("w0", Pattern(), "w0") in s.transitions
    assert str(Pattern()) == "*" and str(Pattern("p", None, "q")) == "(p _ q)"


@pytest.mark.parametrize("text,line,col", [
    ("state s init\n", 1, 1),
    ("spec nbw\nstate s init\ntrans s (p a.1 q s\n", 3, 9),
    ("spec nbw\nstate s init\ntrans s (p a.1) s\n", 3, 9),
    ("spec nbw\nstate s init\ntrans s (p a1 q) s\n", 3, 9),
    ("spec nbw\nstate s init\ntrans s * t\n", 3, 11),
    ("spec nbw\nstate s init\n  bogus\n", 3, 3),
    ("spec nbw\nstate s init final\n", 2, 14),
    ("spec ltl\n", 1, 1),
    ("spec nbw\nstate s\n", 1, 1),
    ("spec nbw\nstate s init\nstate s\n", 3, 7),
])
def test_parse_spec_errors(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_spec(text)
    assert (info.value.line, info.value.column) == (line, col)


def test_validate_spec_unknown_names(fig2):
    validate_spec(load_spec("infa1_infb"), fig2)
    with pytest.raises(SpecError):
        validate_spec(parse_spec("spec nbw\nstate s init\ntrans s (zz _ _) s\n"), fig2)
    with pytest.raises(SpecError):
        validate_spec(parse_spec("spec nbw\nstate s init\ntrans s (_ c.1 _) s\n"), fig2)
    # aliases make otherwise unknown names legal
    validate_spec(parse_spec("spec nbw\nstate s init\ntrans s (zz c.1 _) s\n"), fig2,
                  Matcher({"a.1": "c.1"}, {"p": "zz"}))


def test_matcher_aliases():
    m = Matcher({"a__0.1": "go.1"}, {"q0__x_1": "q0"})
    e = Edge("q0__x_1", "a__0", 1, "q1__x_0")
    assert m.matches(Pattern("q0", "go.1", None), e)
    assert m.matches(Pattern("q0__x_1", "a__0.1", "q1__x_0"), e)
    assert not m.matches(Pattern("q1", None, None), e)
    assert not m.matches(Pattern(None, "b", None), e)


def test_lasso_spec_shape():
    s = lasso_spec([E("p", "a.2", "q")], [E("q", "b", "p")])
    assert s.kind == "nbw" and len(s.states) == 2 and s.accepting == set(s.states)
    with pytest.raises(ValueError):
        lasso_spec([E("p", "a.2", "q")], [])


# -- A^inf structure --------------------------------------------------------------------------

def test_fig2_ainf_structure():
    a = ainf("fig2")
    assert a.copy_transitions(3) == []
    copy2 = a.copy_transitions(2)
    assert len(copy2) == 4
    ops = {tr.label.letter: tr.op for tr in copy2 if tr.label.letter != "b"}
    assert ops == {"a.1": INC, "a.2": INC}
    assert {tr.op for tr in copy2 if tr.label.is_broadcast} == {RESET}
    assert all(tr.op == NOOP for tr in a.copy_transitions(1))
    assert a.initial == {(1, "p@0")}
    assert a.buchi == [frozenset(s for s in a.states if s[0] != 1)]


def test_all_red_copies_edgeless():
    a = ainf("all_red")
    assert a.copy_transitions(2) == [] and a.copy_transitions(3) == []
    assert emptiness(a).empty


def test_all_green_never_increments():
    a = ainf("all_green")
    assert all(tr.op != INC for tr in a.copy_transitions(2))
    assert not emptiness(a).empty


@pytest.mark.parametrize("name", TEMPLATES)
def test_copy3_has_no_broadcasts(name):
    a = ainf(name)
    assert not any(tr.label.is_broadcast for tr in a.transitions if tr.dst[0] == 3)
    assert all(tr.op == NOOP for tr in a.transitions if tr.dst[0] in (1, 3))


@settings(max_examples=60)
@given(st.integers(0, 10**6))
def test_ainf_counter_ops_random(seed):
    u = build_unwinding(random_template(random.Random(seed), max_states=5, max_letter_edges=2))
    colors = classify(u).colors()
    a = build_ainf(u, colors)
    by_id = {(e.annotated.src, e.base, e.annotated.dst): colors[e.id] for e in u.edges}
    for tr in a.transitions:
        c = by_id[(tr.src[1], tr.label, tr.dst[1])]
        if tr.dst[0] == 2:
            assert c in ("green", "orange")
            expected = NOOP if c == "green" else (RESET if tr.label.is_broadcast else INC)
            assert tr.op == expected
        elif tr.dst[0] == 3:
            assert c in ("green", "blue")


def test_build_ainf_requires_full_classification(fig2_u):
    with pytest.raises(ValueError):
        build_ainf(fig2_u, {})


# -- products and emptiness ---------------------------------------------------------------------

@pytest.mark.parametrize("name", TEMPLATES)
def test_accept_all_product_agrees(name):
    a = ainf(name)
    assert emptiness(intersect(a, ACCEPT_ALL)).empty == emptiness(a).empty


@pytest.mark.parametrize("name", TEMPLATES)
def test_empty_spec_product(name):
    assert emptiness(intersect(ainf(name), EMPTY)).empty


def test_fig2_eventually_no_b_is_empty():
    assert emptiness(intersect(ainf("fig2"), load_spec("nob_infa1"))).empty


def test_fig2_inf_b_lasso_is_realizable(fig2):
    res = emptiness(intersect(ainf("fig2"), load_spec("inf_b")))
    assert not res.empty
    assert any(e.is_broadcast for e in res.lasso.cycle_word)
    assert realize_lasso(fig2, res.lasso.prefix_word, res.lasso.cycle_word, SearchBudget(max_n=4)) is not None


def test_unreachable_accepting_state_is_empty():
    e = E("p", "a.1", "p")
    a = BoundedCounterAutomaton(["i", "x"], {"i"}, [Transition("i", e, NOOP, "i"), Transition("x", e, NOOP, "x")],
                                [frozenset({"x"})])
    assert emptiness(a).empty


def test_increment_only_cycle_is_empty_reset_is_not():
    e = E("p", "a.1", "p")
    a = BoundedCounterAutomaton(["i"], {"i"}, [Transition("i", e, INC, "i")], [frozenset({"i"})])
    assert emptiness(a).empty
    a.transitions.append(Transition("i", E("p", "b", "p"), RESET, "i"))
    res = emptiness(a)
    assert not res.empty
    assert RESET in {t.op for t in res.lasso.cycle}


def test_case_b_uses_increment_free_piece():
    e, f = E("p", "a.1", "p"), E("p", "a.2", "p")
    trs = [Transition("i", e, INC, "j"), Transition("j", e, INC, "i"), Transition("j", f, NOOP, "j")]
    a = BoundedCounterAutomaton(["i", "j"], {"i"}, trs, [frozenset({"j"})])
    res = emptiness(a)
    assert not res.empty and [t.op for t in res.lasso.cycle] == [NOOP]


def test_unsupported_ops():
    e = E("p", "a.1", "p")
    a = BoundedCounterAutomaton(["i"], {"i"}, [Transition("i", e, "copy", "i")], [frozenset({"i"})])
    with pytest.raises(UnsupportedFeature):
        emptiness(a)
    with pytest.raises(UnsupportedFeature):
        emptiness(BoundedCounterAutomaton(["i"], {"i"}, [], [], counters=2))


def test_check_lasso_rejects_bad_certificates():
    e = E("p", "a.1", "p")
    inc = Transition("i", e, INC, "i")
    a = BoundedCounterAutomaton(["i"], {"i"}, [inc], [frozenset({"i"})])
    with pytest.raises(AssertionError):
        check_lasso(a, Lasso([], [inc]))
    with pytest.raises(AssertionError):
        check_lasso(a, Lasso([], []))


@pytest.mark.parametrize("name", TEMPLATES)
def test_sampled_lassos_are_self_checked(name):
    a = ainf(name)
    lassos = sample_lassos(a, 10, random.Random(0))
    assert bool(lassos) == (not emptiness(a).empty)
    for lasso in lassos:
        check_lasso(a, lasso)
        assert accepts_lasso(a, lasso.prefix_word, lasso.cycle_word)


def test_accepts_lasso_fig2():
    a = ainf("fig2")
    assert accepts_lasso(a, [], [E("p", "a.1", "p"), E("p", "b", "p")])
    assert not accepts_lasso(a, [], [E("p", "a.1", "p")])


def _with_accepting_sink(spec: SpecAutomaton) -> SpecAutomaton:
    sink = "sink_extra"
    trans = list(spec.transitions) + [(sink, Pattern(), sink)]
    trans += [(s, Pattern(), sink) for s in spec.states]
    return SpecAutomaton(spec.kind, spec.states + (sink,), spec.initial, spec.accepting | {sink}, tuple(trans))


@pytest.mark.parametrize("name", TEMPLATES)
@pytest.mark.parametrize("spec", ["nob_infa1", "infa1_infb", "inf_b"])
def test_monotonicity_under_accepting_sink(name, spec):
    t = load_template(name)
    s = load_spec(spec)
    try:
        validate_spec(s, t)
    except SpecError:
        return
    before = check_liveness(t, s, realize=False)
    after = check_liveness(t, _with_accepting_sink(s), realize=False)
    if not before.holds:
        assert not after.holds


# -- verdicts -------------------------------------------------------------------------------------

def test_liveness_fig2(fig2):
    assert check_liveness(fig2, load_spec("nob_infa1")).holds
    v = check_liveness(fig2, load_spec("infa1_infb"))
    assert v.status == "violated" and v.realized_at_n == 2
    assert any(e.letter == "a.1" for e in v.cycle) and any(e.is_broadcast for e in v.cycle)


def test_liveness_all_red_holds_vacuously():
    t = load_template("all_red")
    assert check_liveness(t, ACCEPT_ALL).holds


def test_liveness_needs_nbw(fig2):
    with pytest.raises(SpecError):
        check_liveness(fig2, load_spec("two_a2"))
    with pytest.raises(SpecError):
        check_safety(fig2, load_spec("inf_b"))


def test_safety_fig2(fig2):
    assert check_safety(fig2, load_spec("two_a2")).holds


def test_safety_fig2_mutated():
    t = load_template("fig2_mutated")
    v = check_safety(t, load_spec("two_a2"))
    assert v.status == "violated" and v.realized_at_n == 2
    assert [e.id for e in v.prefix] == ["p:a.2:q", "q:a.2:q"]


def test_safety_empty_word_and_unreachable_edge(fig2):
    eps = parse_spec("spec nfw\nstate s init accepting\n")
    v = check_safety(fig2, eps)
    assert v.status == "violated" and v.prefix == []
    t = parse_template("system rb\nk 2\nstate p init\nstate q\nstate z\n"
                       "edge p a.1 p\nedge p a.2 p\nedge z c.1 z\nedge z c.2 z\n"
                       "edge p b p\nedge q b p\nedge z b z\n")
    unreachable = parse_spec("spec nfw\nstate s init\nstate t accepting\ntrans s * s\ntrans s (z _ _) t\n")
    assert check_safety(t, unreachable).holds


def test_verdict_json_schema(fig2):
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((SCHEMAS / "verdict.schema.json").read_text())
    for v in (check_liveness(fig2, load_spec("nob_infa1")), check_liveness(fig2, load_spec("inf_b")),
              check_safety(load_template("fig2_mutated"), load_spec("two_a2"))):
        data = v.to_json()
        jsonschema.validate(data, schema)
        assert data["stats"]["ms"] is None
        assert v.to_json(timings=True)["stats"]["ms"] is not None


def test_lasso_replays_on_fixture_verdicts():
    """Violated liveness verdicts come with a counterexample the oracle can replay."""
    for name in ("fig2", "fig2_mutated", "two_phase", "all_green"):
        t = load_template(name)
        v = check_liveness(t, ACCEPT_ALL, budget=SearchBudget(max_n=4))
        assert not v.holds and v.realized_at_n is not None, name
