import pytest

from helpers import exec_stmt
from rsc import li
from rsc.lu import Heap, LinkError
from rsc.parser import ParseError, parse_component, parse_context
from rsc.syntax import Component

ENCLAVE = Component("li", {"f": None}, enclave=frozenset({"f"}))


def test_enclave_function_reads_negative_address():
    r = exec_stmt("li", Heap({-1: (5, None), 0: (0, None)}), "0 := !(0 - 1)", stack=("f",), comp=ENCLAVE)
    assert r.status == "terminated" and r.heap.cells[0][0] == 5


def test_context_write_to_enclave_is_stuck():
    heap = Heap({-1: (5, None)})
    r = exec_stmt("li", heap, "0 - 1 := 7", stack=("g",), comp=ENCLAVE)
    assert r.status == "stuck" and r.heap.cells[-1] == (5, None)


def test_context_allocation_is_non_negative():
    r = exec_stmt("li", Heap({-1: (5, None)}), "let x = new 4 in skip", stack=("g",), comp=ENCLAVE)
    assert r.heap.cells[0] == (4, None)


def test_iso_allocates_below_the_lowest_cell():
    r = exec_stmt("li", Heap({-1: (5, None)}), "let x = iso 4 in skip", stack=("f",), comp=ENCLAVE)
    assert r.heap.cells[-2] == (4, None)


def test_iso_starts_at_minus_one():
    r = exec_stmt("li", Heap(), "let x = iso 4 in skip", stack=("f",), comp=ENCLAVE)
    assert r.heap.cells[-1] == (4, None)


def test_iso_outside_the_enclave_is_stuck():
    r = exec_stmt("li", Heap(), "let x = iso 4 in skip", stack=("g",), comp=ENCLAVE)
    assert r.status == "stuck"


def test_top_level_context_code_is_outside_the_enclave():
    comp = parse_component("component { heap { -1 = 3; } enclave f; fun f(x) { skip } }", "li")
    ctx = parse_context("context { fun main(x) { 0 - 1 := 0 } }", "li")
    assert li.run(li.plug(ctx, comp)).status == "stuck"


def test_h0_must_be_negative():
    comp = parse_component("component { heap { 2 = 3; } enclave f; fun f(x) { skip } }", "li")
    with pytest.raises(LinkError):
        li.plug(parse_context("context { fun main(x) { skip } }", "li"), comp)


def test_capability_literals_are_rejected():
    with pytest.raises(ParseError):
        parse_context("context { fun main(x) { let y = kroot in skip } }", "li")
