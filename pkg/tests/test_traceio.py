import json
from pathlib import Path

import pytest

from rsc import la, lp, samples
from rsc.compilers import compile_up
from rsc.lu import Action, Heap
from rsc.parser import parse_component, parse_context
from rsc.syntax import NAT, TRef
from rsc.traceio import TraceError, decode_value, dumps, encode_value, loads
from rsc.values import FALSE, KROOT, TRUE, UNIT, Cap, Loc, Pair

DATA = Path(__file__).parent / "data"


@pytest.mark.parametrize("v", [0, 7, TRUE, FALSE, UNIT, Loc("lroot"), Loc(3), KROOT, Cap(2),
                               Pair(1, Pair(Loc(1), Cap("k0")))])
def test_value_round_trip(v):
    assert decode_value(encode_value(v)) == v


def test_lp_trace_round_trip():
    target = compile_up(samples.leaky()).component
    r = lp.run(lp.plug(samples.leak_attacker(), target))
    assert r.trace and loads(dumps(r.trace)) == r.trace


def test_typed_heap_round_trip():
    trace = [Action("call", "f", TRUE, Heap({Loc("m"): (Loc("m#1"), TRef(NAT)), Loc("m#1"): (0, NAT)}))]
    assert loads(dumps(trace)) == trace


def test_worked_example_file_decodes():
    trace = loads((DATA / "worked_trace.json").read_text())
    assert [a.kind for a in trace] == ["call", "return", "call"]
    assert trace[1].heap.cells[3] == (11, Cap(1))
    assert trace[2].val == 2 and Cap(1) in trace[2].heap.caps


def doc(**action):
    return json.dumps({"actions": [{"heap": [], **action}]})


@pytest.mark.parametrize("text, fragment", [
    ("not json", "not JSON"),
    (doc(kind="jump"), "actions/0/kind"),
    (doc(kind="call", fn="f"), "needs fn and val"),
    (doc(kind="return", dir="?"), "direction"),
    (json.dumps({"actions": [{"kind": "return", "heap": [
        {"addr": 1, "val": {"nat": 0}}, {"addr": 1, "val": {"nat": 1}}]}]}), "twice"),
    (json.dumps({"actions": [{"kind": "return", "heap": [{"addr": 1, "val": {"nat": 0, "bool": True}}]}]}),
     "actions/0/heap/0/val"),
    (json.dumps({"trace": []}), "top level"),
])
def test_malformed_traces_are_rejected(text, fragment):
    with pytest.raises(TraceError, match=fragment):
        loads(text)
