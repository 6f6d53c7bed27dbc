import pytest

from rsc import lp, lu
from rsc.backtranslation import (COUNTER, KNOWN, BacktranslationError, BtState, Exhausted,
                                 backtranslate, bt_action, bt_join, bt_skeleton, bt_value,
                                 check_trace, default_budget, lookup, replay)
from rsc.compilers import compile_up
from rsc.lu import Action, Heap
from rsc.parser import parse_component, parse_context, parse_stmt
from rsc.relations import trace_rel
from rsc.syntax import alpha_eq
from rsc.values import FALSE, TRUE, Cap, Loc, Pair

K = Cap(1)
# Attacker allocates 4 and 3, calls f with 0; f returns having stored a
# protected cell in the attacker's cell 2; the attacker then writes 55 and 15
# and calls f with 2.
WORKED = [
    Action("call", "f", 0, Heap({1: (4, None), 2: (3, None)})),
    Action("return", None, None, Heap({1: (4, None), 2: (Pair(3, K), None), 3: (11, K)})),
    Action("call", "f", 2, Heap({1: (55, None), 2: (Pair(3, K), None), 3: (15, K)})),
]

EXPECTED_BLOCKS = [
    """if !li == 1 then { call incrementCounter 0;
         { let x1 = new 4 in call register <x1, 1> };
         { let x2 = new 3 in call register <x2, 2> };
         call f 0 } else skip""",
    """if !li == 2 then { call incrementCounter 0;
         let l1 = !(!lglob).1.1 in call register <l1, 3> } else skip""",
    """if !li == 3 then { call incrementCounter 0;
         call update <<1, 55>, !lglob>; call update <<3, 15>, !lglob>;
         call f 2 } else skip""",
]


def test_worked_example_blocks():
    st = BtState()
    for action, text in zip(WORKED, EXPECTED_BLOCKS):
        block, st = next(iter(bt_action(action, st, {"f"})))
        assert block.fn == "main"
        expected = parse_stmt(text, "lu", locations=("li", "lglob"))
        assert alpha_eq(block.stmt, expected), block.stmt
    assert st.known == ((1, None), (2, None), (3, K))


def test_input_candidates_cover_boolean_readings():
    cands = list(bt_action(WORKED[0], BtState(), {"f"}))
    # three ambiguous numbers, two readings each
    assert len(cands) == 8


REALIZABLE_COMPONENT = """component { root lroot;
  fun f(x) { let c = !lroot in if c == 0 then { lroot := 1; let y = new 11 in x := y } else skip } }"""
REALIZABLE_ATTACKER = """context {
  fun main(z) { let a = new 4 in let b = new 3 in call f <b, 0>;
                let p = !b with 0 in a := 55 with 0; p.1 := 15 with p.2; call f 2 } }"""


def lp_trace(comp_text, ctx_text):
    comp = parse_component(comp_text, "lu")
    target = compile_up(comp).component
    r = lp.run(lp.plug(parse_context(ctx_text, "lp"), target))
    return comp, r.trace


def test_realizable_example_end_to_end():
    comp, trace = lp_trace(REALIZABLE_COMPONENT, REALIZABLE_ATTACKER)
    assert [a.kind for a in trace] == ["call", "return", "call", "return"]
    bt = backtranslate((), trace, comp)
    assert bt.counter == 5
    assert trace_rel(bt.beta, bt.source_trace, trace, ignore={COUNTER, KNOWN})
    assert bt.replays <= default_budget(trace)


def test_boolean_branch_found_by_search():
    comp, trace = lp_trace(
        "component { root lroot; fun f(x) { if x then lroot := 7 else lroot := 8 } }",
        "context { fun main(z) { call f 0 } }")
    bt = backtranslate((), trace, comp)
    assert bt.source_trace[0].val == TRUE
    assert bt.source_trace[-1].heap.value(Loc("lroot")) == 7


def test_callback_is_answered_in_the_interface_stub():
    comp, trace = lp_trace(
        "component { root lroot; import g; fun f(x) { call g 5; lroot := 1 } }",
        "context { fun main(z) { call f 3 } fun g(y) { skip } }")
    bt = backtranslate(("g",), trace, comp)
    assert [a.kind for a in bt.source_trace] == ["call", "callback", "returnback", "return"]


def test_empty_trace_gives_the_skeleton():
    comp = parse_component(REALIZABLE_COMPONENT, "lu")
    bt = backtranslate((), [], comp)
    assert bt.context == bt_skeleton(()) and bt.counter == 1 and bt.source_trace == []


def test_skeleton_layout():
    sk = bt_skeleton(("g",))
    assert set(sk.funs) == {"main", "incrementCounter", "register", "update", "g"}
    assert sk.heap == {COUNTER: (1, None), KNOWN: (0, None)}


@pytest.mark.parametrize("vt, first", [
    (0, ("lit", 0)), (3, ("lit", 3)),
])
def test_value_candidates_list_numbers_first(vt, first):
    cands = bt_value(vt, {})
    assert cands[0] == first and len(cands) == 2
    assert cands[1] == ("lit", TRUE if vt == 0 else FALSE)


def test_value_candidates_for_known_protected_address():
    assert bt_value(Pair(3, K), {3: K}) == [("ref", 3)]
    assert ("ref", 3) not in bt_value(Pair(3, Cap(2)), {3: K})
    assert bt_value(Pair(3, 0), {3: None})[0] == ("ref", 3)


def test_negative_numbers_are_not_lp_values():
    with pytest.raises(BacktranslationError):
        bt_value(-1, {})


def test_lookup_walks_the_prepend_list():
    known = ((1, None), (2, None), (3, K))
    loc = lambda t: parse_stmt(f"let v = {t} in skip", "lu", locations=("lglob",)).expr
    assert lookup(3, known) == loc("(!lglob).1.1")
    assert lookup(1, known) == loc("(!lglob).2.2.1.1")
    with pytest.raises(BacktranslationError):
        lookup(9, known)


def test_update_on_unknown_index_is_stuck():
    sk = bt_skeleton(())
    ctx = bt_join(sk, [])
    comp = parse_component("component { root lroot; fun f(x) { skip } }", "lu")
    main = ctx.funs["main"]
    stuck = parse_stmt("call update <<9, 1>, !lglob>", "lu", locations=("lglob",))
    ctx.funs["main"] = type(main)(main.name, main.param, stuck, None, main.span)
    r = lu.run(lu.plug(ctx, comp))
    assert r.status == "stuck"


def test_reserved_names_are_rejected():
    with pytest.raises(BacktranslationError):
        bt_skeleton(("register",))
    clash = parse_component("component { root lroot; fun update(x) { skip } }", "lu")
    with pytest.raises(BacktranslationError):
        backtranslate((), WORKED, clash)


def test_malformed_traces_are_rejected():
    with pytest.raises(BacktranslationError):
        check_trace([WORKED[1]])
    with pytest.raises(BacktranslationError):
        check_trace([WORKED[0], WORKED[0]])


def test_replay_stops_at_the_requested_action():
    comp = parse_component(REALIZABLE_COMPONENT, "lu")
    r = replay(bt_skeleton(()), comp, 0)
    assert r.status == "ok" and r.counter == 1


def test_budget_exhaustion_is_reported():
    comp, trace = lp_trace(REALIZABLE_COMPONENT, REALIZABLE_ATTACKER)
    with pytest.raises(Exhausted):
        backtranslate((), trace, comp, budget=1)
