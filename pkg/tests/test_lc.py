from helpers import exec_stmt
from rsc import lc
from rsc.checks import check_race, explore
from rsc.lu import Heap
from rsc.parser import parse_component, parse_context
from rsc.syntax import Destruct, Lit, Skip, Assign, Var
from rsc.values import Cap, Pair


def test_letatom_allocates_and_protects_in_one_step():
    heap = Heap({i: (0, None) for i in range(4)})
    r = exec_stmt("lc", heap, "letatom x = 7 in skip", max_steps=1)
    v, k = r.heap.cells[4]
    assert v == 7 and isinstance(k, Cap) and k in r.heap.caps


def test_letatom_binds_address_capability_pair():
    heap = Heap({0: (0, None)})
    r = exec_stmt("lc", heap, "letatom x = 7 in 0 := x with 0")
    stored = r.heap.cells[0][0]
    assert stored == Pair(1, r.heap.cells[1][1])


def test_destruct_pair_matches():
    r = exec_stmt("lc", Heap({0: (0, None)}), "destruct x = <1, 2> as pair in 0 := x with 0 else skip")
    assert r.heap.cells[0][0] == Pair(1, 2)


def test_destruct_capability_takes_else_branch():
    k = Cap(3)
    stmt = Destruct("x", Lit(k), "nat", Assign(Lit(0), Lit(1), Lit(0)), Assign(Lit(0), Lit(2), Lit(0)))
    r = exec_stmt("lc", Heap({0: (0, None)}, frozenset({k})), stmt)
    assert r.heap.cells[0][0] == 2


def test_fork_adds_process_with_empty_stack():
    r = exec_stmt("lc", Heap({0: (0, None)}), "fork { 0 := 1 with 0 }", max_steps=1)
    assert len(r.state.procs) == 2 and r.state.procs[1].stack == ()


def test_single_process_matches_lp():
    comp = parse_component("component { fun f(x) { let a = new x in skip } }", "lc")
    ctx = parse_context("context { fun main(x) { call f 3 } }", "lc")
    r = lc.run(lc.plug(ctx, comp), seed=5)
    assert [a.kind for a in r.trace] == ["call", "return"]
    assert r.heap.cells[0] == (3, None)


def test_schedule_is_reproducible_from_seed():
    comp = parse_component("component { fun f(x) { let a = new x in skip } }", "lc")
    ctx = parse_context("context { fun main(x) { fork { call f 1 }; fork { call f 2 }; call f 3 } }", "lc")
    p = lc.plug(ctx, comp)
    for seed in range(5):
        assert lc.run(p, seed=seed).trace == lc.run(p, seed=seed).trace


def test_non_atomic_race_is_harmless():
    r = check_race(12)
    assert r["component_stuck"]
    assert 0 < r["stuck_interleavings"] < r["interleavings"]
    assert r["region_untouched"]


def test_letatom_leaves_no_unprotected_window():
    comp = parse_component("component { heap { 0 = 0 : @k0; } fun f(x) { letatom y = 5 in skip } }", "lc")
    ctx = parse_context("context { fun main(x) { fork { let k = hide 1 in 1 := 9 with k }; call f 0 } }", "lc")
    result = explore(lc.plug(ctx, comp), lc, 14)
    for state in result["states"]:
        if 1 in state.heap.cells:
            assert state.heap.cells[1][0] == 5
