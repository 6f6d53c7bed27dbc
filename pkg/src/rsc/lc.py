"""Concurrent capability target LC: LP plus fork, atomic ``letatom`` and
``destruct`` pattern tests.

A component carries its initial heap H0; the monitored region is dom(H0).
"""

from __future__ import annotations

from .lp import CapMachine, fresh_cap, next_address
from .lu import Heap, LinkError, Proc, Program, Red, RunResult, Stuck, check_link, mentions
from .syntax import Component, Context, Destruct, LetAtom, subst
from .values import Cap, Pair


def match_pattern(v, pattern: str) -> bool:
    """Capabilities match neither pattern."""
    if pattern == "nat":
        return type(v) is int
    return isinstance(v, Pair)


class LCMachine(CapMachine):
    lang = "lc"

    def reduce_other(self, s, proc, heap) -> Red:
        match s:
            case LetAtom(x, e, body):
                v = self.eval(heap, e, proc)
                addr, k = next_address(heap), fresh_cap(heap)
                heap2 = heap.set(addr, v, k).with_cap(k)
                return Red(subst(body, x, Pair(addr, k)), heap2)
            case Destruct(x, e, pattern, body, other):
                v = self.eval(heap, e, proc)
                if match_pattern(v, pattern):
                    return Red(subst(body, x, v))
                return Red(other)
        return super().reduce_other(s, proc, heap)

    def fork(self, body, proc: Proc) -> Proc:
        return Proc(body, (), self.top_side(proc))


def h0_heap(comp: Component) -> Heap:
    caps = {tag for _, tag in comp.heap0.values() if tag is not None}
    return Heap(dict(comp.heap0), frozenset(caps))


def plug(ctx: Context, comp: Component) -> Program:
    errors = check_link(ctx, comp)
    caps = h0_heap(comp).caps
    if mentions(ctx, lambda x: isinstance(x, Cap) and x in caps):
        errors.append("attacker-condition: the context mentions a capability of H0")
    if errors:
        raise LinkError(errors)
    return Program("lc", {**ctx.funs, **comp.funs}, frozenset(comp.funs), h0_heap(comp), comp, ctx)


def machine(program: Program) -> LCMachine:
    return LCMachine(program)


def run(program: Program, max_steps: int = 10_000, seed=None, **kw) -> RunResult:
    return machine(program).run(max_steps=max_steps, seed=seed, **kw)
