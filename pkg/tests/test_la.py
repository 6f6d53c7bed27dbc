import pytest

from helpers import exec_stmt
from rsc import la
from rsc.lu import Heap
from rsc.parser import parse_component, parse_context, parse_stmt
from rsc.syntax import NAT, UN, TRef
from rsc.values import Loc, Pair


def component(body, delta="m : Ref Nat;", extra=""):
    return parse_component(f"component {{ delta {{ {delta} }} {extra} fun f(x : UN) {{ {body} }} }}", "la")


def test_typed_let_is_accepted():
    la.typecheck(component("let y : Nat = 3 in skip"))


def test_passing_trusted_reference_out_is_rejected():
    with pytest.raises(la.TypeCheckError):
        la.typecheck(component("call g m", extra="import g;"))


def test_endorse_gives_the_superficial_type():
    typed = la.typecheck(component("endorse y = x as Nat in let z : Nat = y + 1 in skip"))
    assert typed.derivs["f"].rule == "endorse"


def test_store_types_may_not_mention_un():
    with pytest.raises(la.TypeCheckError):
        la.typecheck(component("skip", delta="m : Ref UN;"))


def test_typecheck_returns_a_derivation_per_function():
    typed = la.typecheck(component("let y = new 3 : Nat in y := 4"))
    assert set(typed.derivs) == {"f"}


def test_un_attacker_allocation_is_ok():
    ctx = parse_context("context { fun main(x : UN) { let y = new 4 : UN in y := 5 } }", "la")
    assert la.typecheck_un(ctx, {Loc("m"): TRef(NAT)}) == []


def test_attacker_mentioning_store_location_is_rejected():
    ctx = parse_context("context { fun main(x : UN) { m := 5 } }", "la")
    errors = la.typecheck_un(ctx, {Loc("m"): NAT})
    assert errors and "m" in errors[0]


def test_attacker_allocating_at_trusted_type_is_rejected():
    ctx = parse_context("context { fun main(x : UN) { let y = new 4 : Nat in skip } }", "la")
    assert any(e.startswith("new") for e in la.typecheck_un(ctx, {}))


def test_endorse_number_as_nat_binds_it():
    stmt = parse_stmt("endorse y = 3 as Nat in out := y", "la", locations=("out",))
    r = exec_stmt("la", Heap({Loc("out"): (0, NAT)}), stmt)
    assert r.heap.cells[Loc("out")][0] == 3


def test_endorse_pair_as_reference_is_stuck():
    r = exec_stmt("la", Heap(), "endorse y = <1, 2> as Ref UN in skip")
    assert r.status == "stuck"


def test_endorse_un_reference_succeeds():
    heap = Heap({Loc(1): (0, UN)})
    r = exec_stmt("la", heap, "let q = new 1 : UN in endorse y = q as Ref UN in y := 2")
    assert r.status == "terminated"


def test_fork_adds_a_process_with_an_empty_stack():
    r = exec_stmt("la", Heap(), "fork { skip }", max_steps=1)
    assert len(r.state.procs) == 2 and r.state.procs[1].stack == ()


def test_allocation_records_the_static_type():
    r = exec_stmt("la", Heap(), "let y = new <1, true> : Nat * Bool in skip")
    (cell,) = r.heap.cells.values()
    assert cell == (Pair(1, la.TRUE), la.TProd(NAT, la.BOOL))


def test_plug_rejects_non_un_attackers():
    comp = component("skip")
    ctx = parse_context("context { fun main(x : UN) { let y = new 4 : Nat in skip } }", "la")
    with pytest.raises(la.LinkError):
        la.plug(ctx, comp)


def test_initial_cells_add_auxiliary_reference_targets():
    cells = la.initial_cells({Loc("m"): TRef(NAT)})
    assert list(cells) == [Loc("m"), Loc("m#1")]
    assert cells[Loc("m")] == (Loc("m#1"), TRef(NAT)) and cells[Loc("m#1")] == (0, NAT)


def test_schedule_is_reproducible():
    comp = component("let y = new 1 : Nat in fork { y := 2 }; y := 3")
    ctx = parse_context("context { fun main(x : UN) { fork { call f 1 }; call f 2 } }", "la")
    p = la.plug(ctx, comp)
    for seed in range(5):
        a, b = la.run(p, seed=seed), la.run(p, seed=seed)
        assert a.trace == b.trace and a.heap == b.heap


def test_deposit_analogue_is_accepted_under_every_seed():
    from rsc.monitors import trace_verdict, typing_monitor
    comp = parse_component("""component { delta { bal : Nat; }
      fun deposit(x : UN) { endorse q = x as Nat in let amt : Nat = !bal in bal := amt + q } }""", "la")
    ctx = parse_context("context { fun main(x : UN) { fork { call deposit 3 }; call deposit true } }", "la")
    p = la.plug(ctx, comp)
    for seed in range(20):
        r = la.run(p, seed=seed)
        assert trace_verdict(typing_monitor(comp.delta), [a.heap for a in r.trace] + [r.heap]).accepted
