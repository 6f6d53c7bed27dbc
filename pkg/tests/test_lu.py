import pytest

from rsc import lu
from rsc.lu import CALL, RETURN, Heap, LinkError, Stuck, classify_names
from rsc.parser import ParseError, parse_component, parse_context, parse_expr, parse_program
from rsc.syntax import Assign, Deref, Let, Lit, Proj, Skip, show_program
from rsc.values import TRUE, Loc, Pair


def whole(ctx, comp):
    return lu.plug(parse_context(ctx, "lu"), parse_component(comp, "lu"))


def test_parse_minimal_component():
    c = parse_program("component { root lroot; fun f(x){ skip; ret } }", "lu")
    assert list(c.funs) == ["f"]
    assert c.funs["f"].body == Skip()


def test_parse_deref_and_assignment():
    c = parse_component("component { root lroot; fun f(x){ let y = !x in y := 3; ret } }", "lu")
    body = c.funs["f"].body
    assert isinstance(body, Let) and isinstance(body.expr, Deref)
    assert isinstance(body.body, Assign)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as exc:
        parse_program("component { fun f( {", "lu")
    assert "1:" in str(exc.value)


def test_parse_duplicate_function_is_an_error():
    with pytest.raises(ParseError):
        parse_program("component { root l; fun f(x) { skip } fun f(y) { skip } }", "lu")


def test_show_program_round_trips():
    text = "context { heap { l1 = 4; } fun main(x) { let y = new <1, true> in if y.2 then y := 3 else skip } }"
    p = parse_program(text, "lu")
    assert parse_program(show_program(p), "lu") == p


def test_eval_arithmetic():
    assert lu.eval_expr(Heap(), parse_expr("2 + 3", "lu")) == 5


def test_eval_projection_of_dereference():
    heap = Heap({Loc(1): (Pair(4, TRUE), None)})
    assert lu.eval_expr(heap, Proj(1, Deref(Lit(Loc(1))))) == 4


def test_eval_is_pure():
    heap = Heap({Loc(1): (7, None)})
    before = dict(heap.cells)
    lu.eval_expr(heap, Deref(Lit(Loc(1))))
    assert heap.cells == before


def test_eval_dereference_of_number_is_stuck():
    with pytest.raises(Stuck):
        lu.eval_expr(Heap(), parse_expr("!7", "lu"))


def test_classify_jumps_by_definition_site():
    comp, ctx = {"f", "g"}, {"main", "h"}
    assert classify_names("main", "f", comp, ctx) == "in"
    assert classify_names("f", "g", comp, ctx) == "internal"
    assert classify_names("f", "h", comp, ctx) == "out"


def test_sequence_with_skip_steps_silently():
    p = whole("context { fun main(x) { skip; skip } }", "component { root lroot; fun f(x) { skip } }")
    m = lu.machine(p)
    s = m.step(m.initial()).state
    st = m.step(s)
    assert st.label is None


def test_call_into_component_emits_call_action():
    p = whole("context { fun main(x) { call f 0 } }", "component { root lroot; fun f(x) { skip } }")
    r = lu.run(p)
    assert [a.kind for a in r.trace] == [CALL, RETURN]
    assert r.trace[0].fn == "f" and r.trace[0].val == 0
    assert r.trace[0].heap.cells == {Loc("lroot"): (0, None)}
    assert r.trace[0].dir == "?" and r.trace[1].dir == "!"


def test_main_returning_immediately_has_empty_trace():
    r = lu.run(whole("context { fun main(x) { skip } }", "component { root lroot; fun f(x) { skip } }"))
    assert r.trace == [] and r.status == "terminated"


def test_first_action_carries_argument():
    r = lu.run(whole("context { fun main(x) { call f 7 } }", "component { root lroot; fun f(x) { skip } }"))
    assert r.trace[0].val == 7


def test_budget_exhaustion_is_divergence():
    p = whole("context { fun main(x) { call main x } }", "component { root lroot; fun f(x) { skip } }")
    r = lu.run(p, max_steps=100)
    assert r.status == "diverged" and r.steps <= 100


def test_deep_recursion_is_divergence_not_a_crash():
    p = whole("context { fun main(x) { call f x } }",
              "component { root lroot; fun f(x) { call f x; skip } }")
    r = lu.run(p, max_steps=100_000)
    assert r.status == "diverged"


def test_stuck_is_distinct_from_terminated():
    r = lu.run(whole("context { fun main(x) { let y = 1.1 in skip } }",
                     "component { root lroot; fun f(x) { skip } }"))
    assert r.status == "stuck" and r.reason


def test_component_and_context_sharing_a_name():
    with pytest.raises(LinkError) as exc:
        whole("context { fun main(x) { skip } fun f(x) { skip } }", "component { root lroot; fun f(x) { skip } }")
    assert any(e.startswith("duplicate-name") for e in exc.value.errors)


def test_context_mentioning_the_root():
    with pytest.raises(LinkError) as exc:
        whole("context { fun main(x) { lroot := 1 } }", "component { root lroot; fun f(x) { skip } }")
    assert any(e.startswith("attacker-condition") for e in exc.value.errors)


def test_imports_must_be_covered():
    with pytest.raises(LinkError) as exc:
        whole("context { fun main(x) { skip } }", "component { root lroot; import g; fun f(x) { call g 1 } }")
    assert any(e.startswith("uncovered-import") for e in exc.value.errors)


def test_context_with_main_and_import_links():
    p = whole("context { fun main(x) { call f 1 } fun g(x) { skip } }",
              "component { root lroot; import g; fun f(x) { call g x } }")
    assert lu.run(p).status == "terminated"


def test_initial_state_calls_main_and_holds_root():
    p = whole("context { fun main(x) { skip } }", "component { root lroot; fun f(x) { skip } }")
    st = lu.initial_state(p)
    assert st.heap.cells[Loc("lroot")] == (0, None)
    assert len(st.procs) == 1 and st.procs[0].stack == ()


def test_allocation_grows_heap_by_one_fresh_location_each():
    p = whole("context { fun main(x) { let a = new 1 in let b = new 2 in let c = new 3 in skip } }",
              "component { root lroot; fun f(x) { skip } }")
    r = lu.run(p)
    fresh = [l for l in r.heap.cells if isinstance(l.id, int)]
    assert len(set(fresh)) == 3
