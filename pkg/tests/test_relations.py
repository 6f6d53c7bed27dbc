import pytest

from rsc.lu import Action, Heap
from rsc.relations import (Bijection, BijectionError, action_rel, grow, heap_rel, infer_beta,
                           strip_rel, trace_rel, value_rel)
from rsc.values import FALSE, KROOT, TRUE, UNIT, Cap, Loc, Pair

ROOT = Loc("lroot")
K1 = Cap(1)
BETA = Bijection.of([(ROOT, 0, KROOT), (Loc(1), 1, K1), (Loc(2), 2, None)])


@pytest.mark.parametrize("vs, vt, ok", [
    (3, 3, True), (3, 4, False),
    (TRUE, 0, True), (TRUE, 1, False),
    (FALSE, 1, True), (FALSE, 7, True), (FALSE, 0, False),
    (UNIT, 0, True), (UNIT, 1, False),
    (0, KROOT, True), (1, KROOT, False),
    (ROOT, Pair(0, KROOT), True), (ROOT, Pair(0, K1), False), (ROOT, 0, False),
    (Loc(1), Pair(1, K1), True), (Loc(1), Pair(2, K1), False),
    (Loc(2), Pair(2, 0), True), (Loc(2), Pair(2, K1), True),
    (Loc(9), Pair(9, 0), False),
    (Pair(TRUE, Loc(1)), Pair(0, Pair(1, K1)), True),
    (Pair(TRUE, Loc(1)), Pair(1, Pair(1, K1)), False),
    (Pair(1, 2), 1, False),
])
def test_value_relation(vs, vt, ok):
    assert value_rel(BETA, vs, vt) is ok


def test_bare_bijection_relates_locations_to_addresses():
    beta = Bijection.of([(Loc("m"), -1, KROOT)], bare=True)
    assert beta.lookup(Loc("m")) == (-1, None)
    assert value_rel(beta, Loc("m"), -1)
    assert not value_rel(beta, Loc("m"), Pair(-1, 0))


def test_heap_relation_checks_every_source_cell():
    hs = Heap({ROOT: (TRUE, None), Loc(1): (Loc(2), None), Loc(2): (5, None)})
    ht = Heap({0: (0, KROOT), 1: (Pair(2, 0), K1), 2: (5, None), 3: (8, None)})
    assert heap_rel(BETA, hs, ht)
    assert not heap_rel(BETA, hs, ht, strict=True)
    assert heap_rel(BETA, hs, ht.restrict({0, 1, 2}), strict=True)
    assert not heap_rel(BETA, hs, Heap({**ht.cells, 1: (Pair(2, 0), None)}))
    assert not heap_rel(BETA, hs, Heap({**ht.cells, 2: (6, None)}))


def test_ignored_cells_are_skipped():
    hs = Heap({ROOT: (0, None), Loc("li"): (4, None)})
    ht = Heap({0: (0, KROOT)})
    assert not heap_rel(BETA, hs, ht)
    assert heap_rel(BETA, hs, ht, ignore={Loc("li")})


def test_action_and_trace_relation():
    hs, ht = Heap({ROOT: (1, None)}), Heap({0: (1, KROOT)})
    a_s, a_t = Action("call", "f", TRUE, hs), Action("call", "f", 0, ht)
    assert action_rel(BETA, a_s, a_t)
    assert not action_rel(BETA, a_s, Action("call", "g", 0, ht))
    assert not action_rel(BETA, a_s, Action("ret", None, None, ht))
    assert trace_rel(BETA, [a_s], [a_t])
    assert not trace_rel(BETA, [a_s], [a_t, a_t])
    assert strip_rel(BETA, [hs], [ht, ht])


def test_extension_must_stay_a_bijection():
    with pytest.raises(BijectionError):
        BETA.extend([(Loc(3), 1, None)])
    with pytest.raises(BijectionError):
        BETA.extend([(Loc(1), 5, None)])
    assert BETA.extend([(Loc(1), 1, K1)]) == BETA
    assert BETA.extend([(Loc(3), 3, None)]).source_of(3) == (Loc(3), None)


def test_json_round_trip():
    assert Bijection.from_json(BETA.to_json()) == BETA
    bare = Bijection.of([(Loc("m"), -1, None)], bare=True)
    assert Bijection.from_json(bare.to_json()) == bare


def test_grow_pairs_new_cells_in_allocation_order():
    beta = Bijection.of([(ROOT, 0, KROOT)])
    hs = Heap({ROOT: (0, None), Loc(2): (1, None), Loc(1): (2, None)})
    ht = Heap({0: (0, KROOT), 5: (1, K1), 4: (2, None)})
    grown = grow(beta, hs, ht)
    assert grown.lookup(Loc(1)) == (4, None) and grown.lookup(Loc(2)) == (5, K1)


def test_grow_fails_when_source_outgrows_target():
    with pytest.raises(BijectionError):
        grow(Bijection.of([]), Heap({Loc(1): (0, None)}), Heap())


def test_grow_orders_enclave_addresses_downwards():
    beta = Bijection.of([], bare=True)
    grown = grow(beta, Heap({Loc(1): (0, None), Loc(2): (0, None)}), Heap({-2: (0, None), -1: (0, None)}))
    assert grown.lookup(Loc(1)) == (-1, None)


def test_infer_beta_along_traces():
    beta = Bijection.of([(ROOT, 0, KROOT)])
    ts = [Action("call", "f", 0, Heap({ROOT: (0, None)})), Action("ret", None, None, Heap({ROOT: (Loc(1), None), Loc(1): (3, None)}))]
    tt = [Action("call", "f", 0, Heap({0: (0, KROOT)})), Action("ret", None, None, Heap({0: (Pair(1, K1), KROOT), 1: (3, K1)}))]
    inferred = infer_beta(beta, ts, tt)
    assert inferred.lookup(Loc(1)) == (1, K1)
    assert trace_rel(inferred, ts, tt)
    assert infer_beta(beta, ts, tt[:1], final=(Heap({Loc(7): (0, None), ROOT: (0, None)}), Heap({0: (0, KROOT)}))) is None
