"""Capability-machine target language LP.

Addresses are naturals and every cell carries a tag: ``None`` for public
cells or a capability. Reading or writing a tagged cell requires presenting
that capability; ``hide`` mints a fresh one for a public cell.
"""

from __future__ import annotations

from .lu import Heap, LinkError, Machine, Proc, Program, Red, RunResult, Stuck, check_link, mentions
from .syntax import Component, Context, Hide, Ifz, Lit, Skip, subst
from .values import KROOT, Cap


def fresh_cap(heap: Heap) -> Cap:
    serials = [k.id for k in heap.caps if isinstance(k.id, int)]
    return Cap(max(serials, default=0) + 1)


def next_address(heap: Heap) -> int:
    return max((a for a in heap.cells if a >= 0), default=-1) + 1


class CapMachine(Machine):
    """Rules shared by the numeric-address targets LP and LC."""

    lang = "lp"
    comparison_true, comparison_false = 0, 1

    def check_access(self, heap: Heap, addr, cap, proc: Proc):
        if type(addr) is not int or addr not in heap:
            raise Stuck(f"no cell at {addr!r}")
        tag = heap.annot(addr)
        if tag is not None and tag != cap:
            raise Stuck(f"capability check failed at address {addr}")

    def deref(self, heap, v, cap, proc):
        self.check_access(heap, v, cap, proc)
        return heap.value(v)

    def assign(self, heap, target, v, cap, proc):
        self.check_access(heap, target, cap, proc)
        return heap.set(target, v, heap.annot(target))

    def alloc(self, heap, v, stmt):
        addr = next_address(heap)
        return addr, heap.set(addr, v, None)

    def reduce_other(self, s, proc, heap) -> Red:
        match s:
            case Ifz(c, then, other):
                v = self.eval(heap, c, proc)
                if type(v) is not int:
                    raise Stuck(f"ifz on non-number {v!r}")
                return Red(then if v == 0 else other)
            case Hide(x, e, body):
                addr = self.eval(heap, e, proc)
                if type(addr) is not int or addr not in heap:
                    raise Stuck(f"hide of {addr!r}")
                if heap.annot(addr) is not None:
                    raise Stuck(f"hide of already protected address {addr}")
                k = fresh_cap(heap)
                heap2 = heap.set(addr, heap.value(addr), k).with_cap(k)
                return Red(subst(body, x, k), heap2)
        raise Stuck(f"no rule for {type(s).__name__} in {self.lang.upper()}")


def initial_heap() -> Heap:
    return Heap({0: (0, KROOT)}, frozenset({KROOT}))


def plug(ctx: Context, comp: Component) -> Program:
    errors = check_link(ctx, comp)
    if mentions(ctx, lambda x: x == KROOT):
        errors.append("attacker-condition: the context mentions kroot")
    if errors:
        raise LinkError(errors)
    return Program("lp", {**ctx.funs, **comp.funs}, frozenset(comp.funs), initial_heap(), comp, ctx)


def machine(program: Program) -> CapMachine:
    return CapMachine(program)


def run(program: Program, max_steps: int = 10_000, **kw) -> RunResult:
    return machine(program).run(max_steps=max_steps, **kw)


def eval_expr(heap: Heap, e):
    """Evaluate a closed LP expression; raises ``Stuck``."""
    prog = Program("lp", {}, frozenset(), heap, Component("lp", {}), Context("lp", {}))
    return CapMachine(prog).eval(heap, e, Proc(Skip()))
