import json

import pytest
from click.testing import CliRunner

from rsc import samples
from rsc.cli import main
from rsc.compilers import compile_up
from rsc.parser import parse_component, parse_context
from rsc import lp, traceio

from test_backtranslation import REALIZABLE_ATTACKER, REALIZABLE_COMPONENT


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def invoke(*args):
    return CliRunner().invoke(main, list(args))


def test_parse_prints_canonical_form(files):
    r = invoke("parse", files("d.lu", samples.DEPOSIT))
    assert r.exit_code == 0 and "fun deposit(x)" in r.output
    assert invoke("parse", files("d.lu", r.output)).output == r.output


def test_parse_error_exits_2(files):
    r = invoke("parse", files("bad.lu", "component { fun }"))
    assert r.exit_code == 2 and "1:" in r.output


def test_unknown_extension_needs_lang(files):
    assert invoke("parse", files("x.txt", samples.DEPOSIT)).exit_code == 2
    assert invoke("parse", "--lang", "lu", files("x.txt", samples.DEPOSIT)).exit_code == 0


def test_typecheck_exit_codes(files):
    good = files("g.la", "component { delta { m : Nat; } fun f(x : UN) { endorse y = x as Nat in m := y } }")
    bad = files("b.la", "component { delta { m : Ref Nat; } import g; fun f(x : UN) { call g m } }")
    assert invoke("typecheck", good).exit_code == 0
    assert invoke("typecheck", bad).exit_code == 1
    ctx = files("c.la", "context { fun main(x : UN) { m := 1 } }")
    assert invoke("typecheck", ctx, "--against", good).exit_code == 1


def test_run_prints_the_trace(files):
    r = invoke("run", "--context", files("c.lp", samples.LEAK_ATTACKER),
               "--component", files("d.lu", samples.LEAKY), "--lang", "lu")
    assert r.exit_code == 2  # an LP context cannot be parsed as LU
    ctx = files("c.lu", "context { fun main(x) { call deposit 2 } fun g(y) { skip } }")
    r = invoke("run", "--context", ctx, "--component", files("d.lu", samples.LEAKY), "--json")
    assert r.exit_code == 0
    data = json.loads(r.stdout if hasattr(r, "stdout") else r.output)
    assert [a["kind"] for a in data["actions"]] == ["call", "callback", "returnback", "return"]


def test_run_link_error_exits_2(files):
    ctx = files("c.lu", "context { fun main(x) { lroot := 1 } }")
    assert invoke("run", "--context", ctx, "--component", files("d.lu", samples.DEPOSIT)).exit_code == 2


def test_compile_and_emit_bijection(files, tmp_path):
    out, beta = tmp_path / "out.lp", tmp_path / "beta.json"
    r = invoke("compile", "--compiler", "up", "--in", files("d.lu", samples.DEPOSIT),
               "--out", str(out), "--emit-bijection", str(beta))
    assert r.exit_code == 0
    assert "kroot" in out.read_text()
    assert invoke("parse", str(out)).exit_code == 0
    assert json.loads(beta.read_text())["triples"] == [[{"loc": "lroot"}, 0, {"cap": "kroot"}]]
    r = invoke("compile", "--compiler", "ap", "--in",
               files("b.la", "component { delta { m : Ref Nat; } import g; fun f(x : UN) { call g m } }"))
    assert r.exit_code == 2


def test_backtranslate_reproduces_a_trace(files):
    comp = parse_component(REALIZABLE_COMPONENT, "lu")
    trace = lp.run(lp.plug(parse_context(REALIZABLE_ATTACKER, "lp"), compile_up(comp).component)).trace
    r = invoke("backtranslate", "--trace", files("t.json", traceio.dumps(trace)),
               "--component", files("f.lu", REALIZABLE_COMPONENT))
    assert r.exit_code == 0 and "incrementCounter" in r.output and "final counter: 5" in r.output


def test_backtranslate_bad_trace_exits_2(files):
    r = invoke("backtranslate", "--trace", files("t.json", '{"actions": [{"kind": "x", "heap": []}]}'),
               "--component", files("f.lu", REALIZABLE_COMPONENT))
    assert r.exit_code == 2


def test_check_correctness_passes():
    r = invoke("check", "correctness", "--trials", "20", "--json")
    assert r.exit_code == 0 and json.loads(r.output)["passes"] == 20


def test_check_rsc_up_sample_passes():
    assert invoke("check", "rsc", "--compiler", "up", "--trials", "20").exit_code == 0


def test_check_rsc_finds_the_leak(files):
    r = invoke("check", "rsc", "--compiler", "up", "--trials", "200",
               "--component", files("l.lu", samples.LEAKY),
               "--source-monitor", files("s.mon", samples.BALANCE_MONITOR_LU),
               "--target-monitor", files("t.mon", samples.BALANCE_MONITOR_LP))
    assert r.exit_code == 1


def test_check_rsc_custom_component_needs_monitors(files):
    r = invoke("check", "rsc", "--compiler", "up", "--component", files("d.lu", samples.DEPOSIT))
    assert r.exit_code == 2


def test_check_rsc_typed_compiler():
    r = invoke("check", "rsc", "--compiler", "ai", "--trials", "2", "--attackers", "2",
               "--schedule-seeds", "2", "--json")
    assert r.exit_code == 0 and json.loads(r.output)["name"] == "rsc-ai"


def test_monitor_rel_exit_codes(files):
    s = files("s.mon", samples.BALANCE_MONITOR_LU)
    t = files("t.mon", samples.BALANCE_MONITOR_LP)
    assert invoke("check", "monitor-rel", s, t).exit_code == 0
    strict = files("u.mon", "monitor { root kroot; states ok; init ok; trans ok -> ok when root.val > 0; }")
    r = invoke("check", "monitor-rel", s, strict, "--json")
    assert r.exit_code == 1 and json.loads(r.output)["status"] == "counterexample"
    deep = files("d.mon", "monitor { root lroot; states ok; init ok; trans ok -> ok when root.val.val.val.val.val == 0; }")
    assert invoke("check", "monitor-rel", deep, t).exit_code == 2
