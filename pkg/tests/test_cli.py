import json
import subprocess
import sys
from pathlib import Path

import pytest

from rbcheck.cli import main
from rbcheck.fixtures import fixture_path

SCHEMAS = Path(__file__).parent.parent / "schemas"


def fx(name):
    return str(fixture_path(name))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def schema(name):
    jsonschema = pytest.importorskip("jsonschema")
    s = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    return lambda data: jsonschema.validate(data, s)


# -- reduce -------------------------------------------------------------------------------

def test_reduce_writes_files(tmp_path, capsys):
    out, mp = tmp_path / "out.tpl", tmp_path / "out.map.json"
    code, _, _ = run(capsys, "reduce", fx("clocked.ttpl"), "-o", str(out), "--map", str(mp))
    assert code == 0
    assert "state q0__x_0 init" in out.read_text()
    relabel = json.loads(mp.read_text())
    schema("relabel_map")(relabel)
    assert relabel["a__0"]["orig_action"] == "a"
    # the reduced output parses back as an RB template
    code, text, _ = run(capsys, "unwind", str(out), "--json")
    assert code == 0 and json.loads(text)["n"] >= 0


def test_reduce_malformed_guard(tmp_path, capsys):
    bad = tmp_path / "bad.ttpl"
    bad.write_text("system timed\nk 2\nclock x\nstate q init\nedge q a.1 q guard (lt 1 x\n")
    code, _, err = run(capsys, "reduce", str(bad))
    assert code == 2 and "line 5, column" in err


def test_reduce_budget(capsys):
    code, _, err = run(capsys, "reduce", fx("clocked.ttpl"), "--cap", "2")
    assert code == 2 and "3 states" in err and "cap of 2" in err


# -- unwind / classify ---------------------------------------------------------------------------

def test_unwind_json_and_dot(tmp_path, capsys):
    dot = tmp_path / "u.dot"
    code, out, _ = run(capsys, "unwind", fx("fig2.tpl"), "--json", "--dot", str(dot))
    assert code == 0
    data = json.loads(out)
    schema("unwinding")(data)
    assert data["n"] == 0 and data["r"] == 1
    assert dot.read_text().count("subgraph cluster") == 1


def test_unwind_text(capsys):
    code, out, _ = run(capsys, "unwind", fx("fig2.tpl"))
    assert code == 0 and out.startswith("n=0 r=1")


def test_classify_fig2(capsys):
    code, out, _ = run(capsys, "classify", fx("fig2.tpl"), "--json")
    assert code == 0
    data = json.loads(out)
    schema("classification")(data)
    assert data["n"] == 0 and data["r"] == 1
    assert {v["color"] for v in data["edges"].values()} == {"orange"}
    assert all(v["witness"]["t2"] is not None for v in data["edges"].values())


def test_classify_edge_filter_and_no_witness(tmp_path, capsys):
    dot = tmp_path / "c.dot"
    code, out, _ = run(capsys, "classify", fx("fig1.tpl"), "--json", "--no-witness",
                       "--edge", "q:c.1:r@comp0", "--dot", str(dot))
    data = json.loads(out)
    assert code == 0 and list(data["edges"]) == ["q:c.1:r@comp0"]
    assert data["edges"]["q:c.1:r@comp0"] == {"color": "blue", "t1": True, "t2": False, "witness": None}
    assert "blue" in dot.read_text()


def test_classify_unknown_edge(capsys):
    code, _, err = run(capsys, "classify", fx("fig2.tpl"), "--edge", "p:zz.1:p@comp0")
    assert code == 2 and "unknown edge" in err


def test_classify_jobs_is_deterministic(capsys):
    _, a, _ = run(capsys, "classify", fx("two_phase.tpl"), "--json")
    _, b, _ = run(capsys, "classify", fx("two_phase.tpl"), "--json", "--jobs", "2")
    assert a == b


# -- safety / liveness -------------------------------------------------------------------------

def test_liveness_holds(capsys):
    code, out, _ = run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("nob_infa1.spec"), "--json")
    assert code == 0
    data = json.loads(out)
    schema("verdict")(data)
    assert data["status"] == "holds" and data["counterexample"] is None


def test_liveness_violated(capsys):
    code, out, _ = run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("infa1_infb.spec"), "--json")
    assert code == 1
    data = json.loads(out)
    schema("verdict")(data)
    assert data["status"] == "violated" and data["counterexample"]["cycle"]
    assert data["realized_at_n"] == 2


def test_liveness_text_output(capsys):
    code, out, _ = run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("inf_b.spec"))
    assert code == 1 and out.startswith("violated") and "cycle:" in out


def test_safety(capsys):
    code, out, _ = run(capsys, "safety", fx("fig2.tpl"), "--spec", fx("two_a2.spec"), "--json")
    assert code == 0 and json.loads(out)["status"] == "holds"
    code, out, _ = run(capsys, "safety", fx("fig2_mutated.tpl"), "--spec", fx("two_a2.spec"), "--json")
    data = json.loads(out)
    assert code == 1 and data["counterexample"] == {"prefix": ["p:a.2:q", "q:a.2:q"], "cycle": []}


def test_spec_alphabet_mismatch(tmp_path, capsys):
    spec = tmp_path / "bad.spec"
    spec.write_text("spec nbw\nstate s init accepting\ntrans s (_ zz.1 _) s\n")
    code, _, err = run(capsys, "liveness", fx("fig2.tpl"), "--spec", str(spec))
    assert code == 2 and "zz.1" in err


def test_spec_kind_mismatch(capsys):
    code, _, _ = run(capsys, "safety", fx("fig2.tpl"), "--spec", fx("inf_b.spec"))
    assert code == 2


def test_timed_input_is_reduced(tmp_path, capsys):
    spec = tmp_path / "a.spec"
    # bad: some process eventually fires a from q0 infinitely often
    spec.write_text("spec nbw\nstate s init\nstate t accepting\ntrans s * s\n"
                    "trans s (q0 a.1 q0) t\ntrans t * s\n")
    code, out, _ = run(capsys, "liveness", fx("clocked.ttpl"), "--spec", str(spec), "--json")
    data = json.loads(out)
    assert code == 1 and data["status"] == "violated"
    assert any("a__0.1" in e for e in data["counterexample"]["cycle"])


def test_missing_file(capsys):
    code, _, err = run(capsys, "unwind", "/nonexistent/x.tpl")
    assert code == 2 and err


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.tpl"
    bad.write_text("system rb\nk 2\nstate p init\nedge p a.1 q\n")
    code, _, err = run(capsys, "unwind", str(bad))
    assert code == 2 and "line 4" in err


# -- oracle --------------------------------------------------------------------------------------

def test_oracle_pseudo_cycle(capsys):
    code, out, _ = run(capsys, "oracle", "pseudo-cycle", fx("fig1.tpl"), "--edge", "q:c.1:r@comp0", "--max-n", "4")
    data = json.loads(out)
    schema("oracle")(data)
    assert code == 0 and data["found"] and len(data["cycle"]) == 3 and data["broadcasts"] == 0


def test_oracle_pseudo_cycle_not_found(capsys):
    code, out, _ = run(capsys, "oracle", "pseudo-cycle", fx("fig2.tpl"), "--edge", "p:a.1:p@comp0",
                       "--kind", "broadcast-free", "--max-n", "3")
    assert code == 0 and json.loads(out) == {"edge": "p:a.1:p@comp0", "found": False}


def test_oracle_exec_fin(capsys):
    code, out, _ = run(capsys, "oracle", "exec-fin", fx("fig2.tpl"), "--n", "2", "--max-len", "4")
    data = json.loads(out)
    schema("oracle")(data)
    assert code == 0 and [] in data["words"] and ["p:a.2:q", "q:b:p"] in data["words"]
    assert data["words"] == sorted(data["words"])


def test_oracle_realize(capsys):
    code, out, _ = run(capsys, "oracle", "realize", fx("fig2.tpl"), "--prefix", "-", "--cycle", "p:a.2:q,q:b:p")
    data = json.loads(out)
    schema("oracle")(data)
    assert code == 0 and data["realized_at_n"] == 2


def test_oracle_realize_empty_cycle(capsys):
    code, _, _ = run(capsys, "oracle", "realize", fx("fig2.tpl"), "--cycle", "-")
    assert code == 2


def test_oracle_enumerate_and_loading(tmp_path, capsys):
    dot = tmp_path / "g.dot"
    code, out, _ = run(capsys, "oracle", "enumerate", fx("fig2.tpl"), "--n", "2", "--dot", str(dot))
    data = json.loads(out)
    schema("oracle")(data)
    assert code == 0 and data["configurations"] == 3 and dot.read_text().startswith("digraph")
    code, out, _ = run(capsys, "oracle", "loading", fx("fig2.tpl"), "--b", "0", "--n-target", "2")
    data = json.loads(out)
    schema("oracle")(data)
    assert code == 0 and data["found"] and data["n"] == 4


# -- cross-cutting ----------------------------------------------------------------------------------

def test_json_is_byte_stable(capsys):
    outs = []
    for _ in range(2):
        run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("infa1_infb.spec"), "--json")
    for _ in range(2):
        outs.append(run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("infa1_infb.spec"), "--json")[1])
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["stats"]["ms"] is None


def test_timings_flag(capsys):
    _, out, _ = run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("inf_b.spec"), "--json", "--timings")
    assert isinstance(json.loads(out)["stats"]["ms"], float)


def test_manifest(tmp_path, capsys):
    m = tmp_path / "run.json"
    code, _, _ = run(capsys, "liveness", fx("fig2.tpl"), "--spec", fx("infa1_infb.spec"), "--manifest", str(m))
    data = json.loads(m.read_text())
    schema("manifest")(data)
    assert code == 1
    assert data["command"] == "liveness" and data["verdicts"] == {"status": "violated", "exit_code": 1}
    assert data["inputs"] == [fx("fig2.tpl"), fx("infa1_infb.spec")]
    assert data["options"]["max_n"] == 4


def test_budget_env_override(monkeypatch, capsys):
    import rbcheck.cli as cli

    seen = {}
    real = cli.realize_lasso

    def spy(t, prefix, cycle, budget):
        seen["ms"] = budget.max_millis
        return real(t, prefix, cycle, budget)

    monkeypatch.setattr(cli, "realize_lasso", spy)
    monkeypatch.setenv("RBCHECK_BUDGET_MS", "777")
    run(capsys, "oracle", "realize", fx("fig2.tpl"), "--cycle", "p:b:p")
    assert seen["ms"] == 777


def test_console_script_exit_codes():
    exe = [sys.executable, "-m", "rbcheck.cli"]
    ok = subprocess.run(exe + ["liveness", fx("fig2.tpl"), "--spec", fx("nob_infa1.spec")],
                        capture_output=True, text=True)
    bad = subprocess.run(exe + ["liveness", fx("fig2.tpl"), "--spec", fx("inf_b.spec")],
                         capture_output=True, text=True)
    usage = subprocess.run(exe + ["liveness", fx("fig2.tpl")], capture_output=True, text=True)
    assert (ok.returncode, bad.returncode, usage.returncode) == (0, 1, 2)
    assert ok.stdout.strip() == "holds"
